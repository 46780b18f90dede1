#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CasePattern {
    Lower,
    Capitalized,
    Upper,
    Mixed,
}

impl CasePattern {
    pub fn of(word: &str) -> CasePattern {
        let mut cased = word.chars().filter(|c| c.is_lowercase() || c.is_uppercase());
        let Some(first) = cased.next() else {
            return CasePattern::Lower;
        };
        let rest: Vec<char> = cased.collect();
        let rest_lower = rest.iter().all(|c| c.is_lowercase());
        let rest_upper = rest.iter().all(|c| c.is_uppercase());
        match (first.is_uppercase(), rest_lower, rest_upper) {
            (false, true, _) => CasePattern::Lower,
            (true, true, _) => CasePattern::Capitalized,
            (true, false, true) => CasePattern::Upper,
            _ => CasePattern::Mixed,
        }
    }
}

/// Applies a case pattern to a lowercase word. Mixed is rendered as capitalized.
pub fn recase(word: &str, pattern: CasePattern) -> String {
    match pattern {
        CasePattern::Lower => word.to_owned(),
        CasePattern::Upper => word.to_uppercase(),
        CasePattern::Capitalized | CasePattern::Mixed => {
            let mut chars = word.chars();
            match chars.next() {
                Some(first) => first.to_uppercase().chain(chars).collect(),
                None => String::new(),
            }
        }
    }
}
