//! Common Procurement Vocabulary: load the code table, look codes up, and
//! search by wording or code prefix at a chosen level of detail.
//!
//! Codes are an 8-digit stem plus an optional check digit (`30124530-8`).
//! The check digit is kept as given and never validated. Coarser categories
//! are stems whose trailing digits are zero; the first two digits are the
//! division.

use std::collections::HashMap;
use std::path::Path;

use serde::Serialize;

use crate::error::CpvError;

pub const STEM_LEN: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CpvEntry {
    /// Digits only, 8 or 9 of them.
    pub code: String,
    pub description: String,
    pub division: String,
}

impl CpvEntry {
    pub fn stem(&self) -> &str {
        &self.code[..STEM_LEN]
    }

    /// True when every stem digit after the first `digits` is '0'.
    pub fn is_within_level(&self, digits: usize) -> bool {
        self.stem().bytes().skip(digits).all(|b| b == b'0')
    }
}

/// First two digits of a code.
pub fn division_of(code: &str) -> Result<&str, CpvError> {
    let code = code.trim();
    if code.len() < 2 || !code.bytes().take(2).all(|b| b.is_ascii_digit()) {
        return Err(CpvError::InvalidCode(code.to_string()));
    }
    Ok(&code[..2])
}

/// Digits of a code as written in nomenclature files (`03000000-1`,
/// `030000001`, `03000000`).
fn parse_code(raw: &str) -> Option<String> {
    let raw = raw.trim();
    let digits: String = match raw.split_once('-') {
        Some((stem, check)) if check.len() == 1 => format!("{stem}{check}"),
        Some(_) => return None,
        None => raw.to_string(),
    };
    let ok = (digits.len() == STEM_LEN || digits.len() == STEM_LEN + 1)
        && digits.bytes().all(|b| b.is_ascii_digit());
    ok.then_some(digits)
}

/// Pads a digit query to a full stem; a 9th digit is dropped.
fn lookup_stem(code: &str) -> Option<String> {
    let code = code.trim();
    let digits: String = code.chars().filter(|c| *c != '-').collect();
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let mut stem: String = digits.chars().take(STEM_LEN).collect();
    while stem.len() < STEM_LEN {
        stem.push('0');
    }
    Some(stem)
}

#[derive(Debug, Clone, Default)]
pub struct CpvTable {
    /// Sorted by code.
    entries: Vec<CpvEntry>,
    by_stem: HashMap<String, usize>,
}

impl CpvTable {
    pub fn from_entries(mut entries: Vec<CpvEntry>) -> CpvTable {
        entries.sort_by(|a, b| a.code.cmp(&b.code));
        let by_stem = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.stem().to_string(), i))
            .collect();
        CpvTable { entries, by_stem }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[CpvEntry] {
        &self.entries
    }

    /// Exact match on the 8-digit stem. Shorter codes are padded with zeros,
    /// so `"30"` finds the division-level entry.
    pub fn lookup(&self, code: &str) -> Option<&CpvEntry> {
        let stem = lookup_stem(code)?;
        self.by_stem.get(&stem).map(|&i| &self.entries[i])
    }

    /// Case-insensitive substring match on the wording, or prefix match on the
    /// code. With `digit_limit = d` only entries at level `d` or coarser are
    /// kept. Results are sorted by code.
    pub fn search(&self, query: &str, digit_limit: Option<usize>) -> Result<Vec<&CpvEntry>, CpvError> {
        if let Some(d) = digit_limit {
            if !(2..=STEM_LEN).contains(&d) {
                return Err(CpvError::DigitLimit(d));
            }
        }
        let query = query.trim();
        let needle = query.to_lowercase();
        let code_query: String = query.chars().filter(|c| *c != '-').collect();
        let code_like = !code_query.is_empty() && code_query.bytes().all(|b| b.is_ascii_digit());
        Ok(self
            .entries
            .iter()
            .filter(|e| {
                needle.is_empty()
                    || e.description.to_lowercase().contains(&needle)
                    || (code_like && e.code.starts_with(&code_query))
            })
            .filter(|e| digit_limit.is_none_or(|d| e.is_within_level(d)))
            .collect())
    }
}

/// Loads a `code,description` CSV. A first row whose code is not a CPV code
/// is taken as a header; when it names an `EN` or `description` column, that
/// column supplies the wording, otherwise the second column does.
pub fn load_cpv(path: &Path) -> Result<CpvTable, CpvError> {
    let text = std::fs::read_to_string(path).map_err(|e| CpvError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_cpv_csv(&text)
}

pub fn parse_cpv_csv(text: &str) -> Result<CpvTable, CpvError> {
    let text = text.trim_start_matches('\u{feff}');
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut entries = Vec::new();
    let mut first_line: HashMap<String, u64> = HashMap::new();
    let mut desc_col = 1;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CpvError::Malformed {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(i as u64 + 1);
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        let raw_code = record.get(0).unwrap_or("");
        let Some(code) = parse_code(raw_code) else {
            if i == 0 {
                if let Some(col) = record.iter().position(|h| {
                    let h = h.trim();
                    h.eq_ignore_ascii_case("en") || h.eq_ignore_ascii_case("description")
                }) {
                    desc_col = col;
                }
                continue;
            }
            return Err(CpvError::Malformed {
                line,
                message: format!("invalid code {raw_code:?}"),
            });
        };
        let description = record.get(desc_col).map(str::trim).unwrap_or("");
        if description.is_empty() {
            return Err(CpvError::Malformed {
                line,
                message: "missing description".into(),
            });
        }
        let stem = code[..STEM_LEN].to_string();
        if let Some(&first) = first_line.get(&stem) {
            return Err(CpvError::DuplicateCode {
                code: stem,
                first_line: first,
                second_line: line,
            });
        }
        first_line.insert(stem, line);
        entries.push(CpvEntry {
            division: code[..2].to_string(),
            code,
            description: description.to_string(),
        });
    }
    Ok(CpvTable::from_entries(entries))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
CODE,EN
30000000-9,\"Office and computing machinery, equipment and supplies except furniture and software packages\"
30100000-0,\"Office machinery, equipment and supplies except computers, printers and furniture\"
30124530-8,Scanner transparency adapters
30200000-1,Computer equipment and supplies
66000000-0,Financial and insurance services
66500000-5,Insurance and pension services
";

    #[test]
    fn loads_and_looks_up() {
        let t = parse_cpv_csv(SAMPLE).unwrap();
        assert_eq!(t.len(), 6);
        assert_eq!(
            t.lookup("30").unwrap().description,
            "Office and computing machinery, equipment and supplies except furniture and software packages"
        );
        assert_eq!(t.lookup("301245308").unwrap().description, "Scanner transparency adapters");
        assert_eq!(t.lookup("30124530").unwrap().code, "301245308");
        assert!(t.lookup("00").is_none());
        assert!(t.lookup("abc").is_none());
    }

    #[test]
    fn search_rules() {
        let t = parse_cpv_csv(SAMPLE).unwrap();
        let codes = |v: Vec<&CpvEntry>| v.into_iter().map(|e| e.stem().to_string()).collect::<Vec<_>>();
        assert_eq!(codes(t.search("", Some(2)).unwrap()), vec!["30000000", "66000000"]);
        assert!(codes(t.search("office", None).unwrap()).contains(&"30000000".to_string()));
        assert_eq!(codes(t.search("3012", None).unwrap()), vec!["30124530"]);
        assert_eq!(codes(t.search("INSURANCE", Some(3)).unwrap()), vec!["66000000", "66500000"]);
        assert!(t.search("zebra", None).unwrap().is_empty());
        assert_eq!(t.search("", Some(9)), Err(CpvError::DigitLimit(9)));
        assert_eq!(t.search("", Some(1)), Err(CpvError::DigitLimit(1)));
    }

    #[test]
    fn divisions() {
        assert_eq!(division_of("30124530").unwrap(), "30");
        assert_eq!(division_of("301").unwrap(), "30");
        assert!(division_of("9").is_err());
        assert!(division_of("x9").is_err());
    }

    #[test]
    fn load_errors() {
        assert!(parse_cpv_csv("").unwrap().is_empty());
        let dup = "30000000-9,A\n03000000-1,B\n30000000,C\n";
        assert_eq!(
            parse_cpv_csv(dup).unwrap_err(),
            CpvError::DuplicateCode {
                code: "30000000".into(),
                first_line: 1,
                second_line: 3
            }
        );
        let bad = "30000000-9,A\n12ab,B\n";
        assert!(matches!(parse_cpv_csv(bad), Err(CpvError::Malformed { line: 2, .. })));
        let missing = "30000000-9,A\n31000000-6\n";
        assert!(matches!(parse_cpv_csv(missing), Err(CpvError::Malformed { line: 2, .. })));
    }

    #[test]
    fn multilingual_header_picks_english() {
        let t = parse_cpv_csv("CODE,DE,EN\n30000000-9,Büromaschinen,Office machinery\n").unwrap();
        assert_eq!(t.lookup("30").unwrap().description, "Office machinery");
    }
}
