use std::fmt::Write as _;

use crate::sensing::{ambiguity_interval, AmbiguitySpec};

pub const TABLE_SCS_HZ: [f64; 5] = [15e3, 30e3, 60e3, 120e3, 240e3];
pub const TABLE_COMBS: [usize; 4] = [2, 4, 6, 12];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmbiguityCell {
    pub scs_hz: f64,
    pub spec: AmbiguitySpec,
}

/// Two-way ambiguity intervals for every (SCS, comb) pair, SCS-major.
pub fn ambiguity_table() -> Vec<AmbiguityCell> {
    TABLE_SCS_HZ
        .iter()
        .flat_map(|&scs| {
            TABLE_COMBS.iter().map(move |&k| AmbiguityCell {
                scs_hz: scs,
                spec: ambiguity_interval(k, scs).expect("table combs are valid"),
            })
        })
        .collect()
}

/// Rows per SCS, columns per comb, meters truncated to integers.
pub fn ambiguity_table_csv() -> String {
    let mut out = String::from("scs_khz");
    for k in TABLE_COMBS {
        let _ = write!(out, ",comb{k}");
    }
    out.push('\n');
    for row in ambiguity_table().chunks(TABLE_COMBS.len()) {
        let _ = write!(out, "{}", row[0].scs_hz / 1e3);
        for cell in row {
            let _ = write!(out, ",{}", cell.spec.interval_two_way.floor() as u64);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halves_when_comb_doubles() {
        let table = ambiguity_table();
        assert_eq!(table.len(), 20);
        for row in table.chunks(4) {
            assert!((row[0].spec.interval_two_way / row[1].spec.interval_two_way - 2.0).abs() < 1e-12);
            assert!((row[2].spec.interval_two_way / row[3].spec.interval_two_way - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_layout() {
        let csv = ambiguity_table_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "scs_khz,comb2,comb4,comb6,comb12");
        assert_eq!(lines[1], "15,4996,2498,1665,832");
        assert_eq!(lines.len(), 6);
    }
}
