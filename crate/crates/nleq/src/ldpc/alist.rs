//! alist text format for sparse parity-check matrices.
//!
//! Layout: `n m`, then `dmax_v dmax_c`, then the n variable degrees, the m
//! check degrees, one neighbor line per variable and one per check (1-based
//! indices, optionally zero-padded to the max degree).

use crate::{Error, Result};

/// Sparse H as adjacency lists, before any encoder preprocessing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlistMatrix {
    pub n_vars: usize,
    pub n_checks: usize,
    pub var_to_check: Vec<Vec<usize>>,
    pub check_to_var: Vec<Vec<usize>>,
}

struct Tokens {
    vals: Vec<usize>,
    pos: usize,
}

impl Tokens {
    fn new(text: &str) -> Result<Self> {
        let vals = text
            .split_whitespace()
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| Error::Config(format!("alist: non-integer token '{t}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Tokens { vals, pos: 0 })
    }

    fn next(&mut self, what: &str) -> Result<usize> {
        let v = self
            .vals
            .get(self.pos)
            .copied()
            .ok_or_else(|| Error::Config(format!("alist: unexpected end before {what}")))?;
        self.pos += 1;
        Ok(v)
    }

    fn peek(&self) -> Option<usize> {
        self.vals.get(self.pos).copied()
    }

    /// Read `deg` nonzero 1-based neighbor indices (converted to 0-based),
    /// then absorb up to `dmax - deg` zero-padding tokens.
    fn neighbors(&mut self, deg: usize, dmax: usize, limit: usize, what: &str) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(deg);
        for j in 0..deg {
            let v = self.next(&format!("{what} neighbor {j}"))?;
            if v == 0 || v > limit {
                return Err(Error::Config(format!(
                    "alist: {what} neighbor index {v} outside 1..={limit}"
                )));
            }
            out.push(v - 1);
        }
        for _ in deg..dmax {
            if self.peek() == Some(0) {
                self.pos += 1;
            } else {
                break;
            }
        }
        let uniq: std::collections::BTreeSet<_> = out.iter().collect();
        if uniq.len() != out.len() {
            return Err(Error::Config(format!("alist: duplicate neighbor in {what}")));
        }
        out.sort_unstable();
        Ok(out)
    }
}

/// Parse alist text. Tolerant of extra whitespace and of both padded and
/// unpadded neighbor lines; strict about counts, ranges, duplicate entries,
/// and transpose consistency.
pub fn parse(text: &str) -> Result<AlistMatrix> {
    let mut tk = Tokens::new(text)?;
    let n_vars = tk.next("variable count")?;
    let n_checks = tk.next("check count")?;
    if n_vars == 0 || n_checks == 0 {
        return Err(Error::Config("alist: empty matrix".into()));
    }
    let dmax_v = tk.next("max variable degree")?;
    let dmax_c = tk.next("max check degree")?;

    let mut var_deg = Vec::with_capacity(n_vars);
    for i in 0..n_vars {
        let d = tk.next(&format!("degree of variable {i}"))?;
        if d == 0 || d > dmax_v {
            return Err(Error::Config(format!(
                "alist: variable {i} degree {d} outside 1..={dmax_v}"
            )));
        }
        var_deg.push(d);
    }
    let mut check_deg = Vec::with_capacity(n_checks);
    for i in 0..n_checks {
        let d = tk.next(&format!("degree of check {i}"))?;
        if d == 0 || d > dmax_c {
            return Err(Error::Config(format!("alist: check {i} degree {d} outside 1..={dmax_c}")));
        }
        check_deg.push(d);
    }
    if var_deg.iter().sum::<usize>() != check_deg.iter().sum::<usize>() {
        return Err(Error::Config("alist: variable and check degree sums differ".into()));
    }

    let mut var_to_check = Vec::with_capacity(n_vars);
    for (i, &d) in var_deg.iter().enumerate() {
        var_to_check.push(tk.neighbors(d, dmax_v, n_checks, &format!("variable {i}"))?);
    }
    let mut check_to_var = Vec::with_capacity(n_checks);
    for (i, &d) in check_deg.iter().enumerate() {
        check_to_var.push(tk.neighbors(d, dmax_c, n_vars, &format!("check {i}"))?);
    }

    // Transpose consistency.
    let mut rebuilt = vec![Vec::new(); n_checks];
    for (v, checks) in var_to_check.iter().enumerate() {
        for &c in checks {
            rebuilt[c].push(v);
        }
    }
    if rebuilt != check_to_var {
        return Err(Error::Config(
            "alist: variable and check adjacency are not transposes".into(),
        ));
    }

    Ok(AlistMatrix { n_vars, n_checks, var_to_check, check_to_var })
}

/// Serialize in padded alist form (the widely-understood variant).
pub fn write(m: &AlistMatrix) -> String {
    let dmax_v = m.var_to_check.iter().map(Vec::len).max().unwrap_or(0);
    let dmax_c = m.check_to_var.iter().map(Vec::len).max().unwrap_or(0);
    let mut s = String::new();
    s.push_str(&format!("{} {}\n{} {}\n", m.n_vars, m.n_checks, dmax_v, dmax_c));
    let degs =
        |lists: &[Vec<usize>]| lists.iter().map(|l| l.len().to_string()).collect::<Vec<_>>().join(" ");
    s.push_str(&degs(&m.var_to_check));
    s.push('\n');
    s.push_str(&degs(&m.check_to_var));
    s.push('\n');
    let mut lines = |lists: &[Vec<usize>], dmax: usize| {
        for l in lists {
            let mut row: Vec<String> = l.iter().map(|&x| (x + 1).to_string()).collect();
            row.resize(dmax, "0".to_string());
            s.push_str(&row.join(" "));
            s.push('\n');
        }
    };
    lines(&m.var_to_check, dmax_v);
    lines(&m.check_to_var, dmax_c);
    s
}

#[cfg(test)]
pub(crate) const HAMMING_7_4: &str = "7 3
3 4
2 2 2 3 1 1 1
4 4 4
1 2 0
1 3 0
2 3 0
1 2 3
1 0 0
2 0 0
3 0 0
1 2 4 5
1 3 4 6
2 3 4 7
";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_hamming_7_4() {
        let m = parse(HAMMING_7_4).unwrap();
        assert_eq!(m.n_vars, 7);
        assert_eq!(m.n_checks, 3);
        assert_eq!(m.var_to_check[3], vec![0, 1, 2]);
        assert_eq!(m.check_to_var[0], vec![0, 1, 3, 4]);
        assert_eq!(m.check_to_var[2], vec![1, 2, 3, 6]);
    }

    #[test]
    fn roundtrips_through_write() {
        let m = parse(HAMMING_7_4).unwrap();
        let again = parse(&write(&m)).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn accepts_unpadded_neighbor_lines() {
        let unpadded = "7 3\n3 4\n2 2 2 3 1 1 1\n4 4 4\n\
            1 2\n1 3\n2 3\n1 2 3\n1\n2\n3\n\
            1 2 4 5\n1 3 4 6\n2 3 4 7\n";
        assert_eq!(parse(unpadded).unwrap(), parse(HAMMING_7_4).unwrap());
    }

    #[test]
    fn rejects_malformed_inputs() {
        // Truncated.
        assert!(parse("7 3\n3 4\n2 2 2").is_err());
        // Non-integer.
        assert!(parse("7 x\n").is_err());
        // Degree over the declared max.
        assert!(parse("2 1\n1 2\n2 1\n3\n").is_err());
        // Neighbor out of range.
        let bad = HAMMING_7_4.replace("2 3 4 7", "2 3 4 9");
        assert!(parse(&bad).is_err());
        // Inconsistent transpose.
        let bad = HAMMING_7_4.replace("1 2 4 5", "1 2 4 6").replace("1 3 4 6", "1 3 4 5");
        assert!(parse(&bad).is_err());
    }

    #[test]
    fn rejects_duplicate_neighbors() {
        let bad = "2 1\n2 2\n1 1\n2\n1\n1\n1 1\n";
        assert!(parse(bad).is_err());
    }
}
