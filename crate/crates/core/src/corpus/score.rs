use super::CorpusError;

/// The FCE exam grades in ascending order with their essay scores.
///
/// The rows between 3.1 and 5.3 advance by one point per grade.
pub const EXAM_GRADES: [(&str, u8); 15] = [
    ("1.1", 1),
    ("1.2", 4),
    ("1.3", 8),
    ("2.1", 9),
    ("2.2", 10),
    ("2.3", 11),
    ("3.1", 12),
    ("3.2", 13),
    ("3.3", 14),
    ("4.1", 15),
    ("4.2", 16),
    ("4.3", 17),
    ("5.1", 18),
    ("5.2", 19),
    ("5.3", 20),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExamScore {
    Score(u8),
    /// Exam score 0: the essay is left out of the corpus.
    Removed,
}

pub fn map_exam_score(grade: &str) -> Result<ExamScore, CorpusError> {
    let grade = grade.trim();
    if grade == "0" {
        return Ok(ExamScore::Removed);
    }
    EXAM_GRADES
        .iter()
        .find(|(g, _)| *g == grade)
        .map(|&(_, s)| ExamScore::Score(s))
        .ok_or_else(|| CorpusError::UnknownGrade(grade.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn printed_rows() {
        assert_eq!(map_exam_score("1.1").unwrap(), ExamScore::Score(1));
        assert_eq!(map_exam_score("1.2").unwrap(), ExamScore::Score(4));
        assert_eq!(map_exam_score("1.3").unwrap(), ExamScore::Score(8));
        assert_eq!(map_exam_score("2.1").unwrap(), ExamScore::Score(9));
        assert_eq!(map_exam_score("2.2").unwrap(), ExamScore::Score(10));
        assert_eq!(map_exam_score("2.3").unwrap(), ExamScore::Score(11));
        assert_eq!(map_exam_score("3.1").unwrap(), ExamScore::Score(12));
        assert_eq!(map_exam_score("5.3").unwrap(), ExamScore::Score(20));
    }

    #[test]
    fn interior_rows_are_unit_steps() {
        assert_eq!(map_exam_score("4.2").unwrap(), ExamScore::Score(16));
        // 3.1 → 5.3 spans eight grade steps and eight score units.
        let from = EXAM_GRADES.iter().position(|(g, _)| *g == "3.1").unwrap();
        for pair in EXAM_GRADES[from..].windows(2) {
            assert_eq!(pair[1].1, pair[0].1 + 1);
        }
        assert_eq!(EXAM_GRADES.len() - 1 - from, 8);
    }

    #[test]
    fn strictly_increasing() {
        for pair in EXAM_GRADES.windows(2) {
            assert!(pair[0].0 < pair[1].0);
            assert!(pair[0].1 < pair[1].1);
        }
    }

    #[test]
    fn zero_is_removed_and_unknown_rejected() {
        assert_eq!(map_exam_score("0").unwrap(), ExamScore::Removed);
        let err = map_exam_score("6.1").unwrap_err();
        assert!(err.to_string().contains("6.1"));
        assert!(map_exam_score("1.4").is_err());
    }
}
