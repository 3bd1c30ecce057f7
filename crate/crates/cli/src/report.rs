//! Aggregation of evaluation rows into the summary tables.
//!
//! Input is the `evaluation.csv` an eval run writes (one row per selection
//! run); output groups rows by `(M, method)` and reports mean AP per
//! threshold, with the sample standard deviation alongside whenever a
//! group holds more than one row (multi-seed random baselines).

use rlp_core::error::{Error, Result};

pub const EVAL_CSV_HEADER: &str = "method,m,seed,ap_03,ap_05,ap_07,frames,runtime_ms";

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub method: String,
    pub m: usize,
    pub seed: u64,
    pub ap: [f64; 3],
    pub frames: String,
    pub runtime_ms: u64,
}

impl EvalRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.method,
            self.m,
            self.seed,
            self.ap[0],
            self.ap[1],
            self.ap[2],
            self.frames,
            self.runtime_ms
        )
    }
}

pub fn parse_rows(text: &str) -> Result<Vec<EvalRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == EVAL_CSV_HEADER => {}
        other => {
            return Err(Error::Parse(format!(
                "evaluation csv must start with '{EVAL_CSV_HEADER}', got {other:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(Error::Parse(format!(
                "evaluation csv row {}: expected 8 fields, got {}",
                n + 2,
                f.len()
            )));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::Parse(format!("evaluation csv row {}: bad {what} '{s}'", n + 2)))
        };
        rows.push(EvalRow {
            method: f[0].to_string(),
            m: num(f[1], "m")? as usize,
            seed: num(f[2], "seed")? as u64,
            ap: [num(f[3], "ap_03")?, num(f[4], "ap_05")?, num(f[5], "ap_07")?],
            frames: f[6].to_string(),
            runtime_ms: num(f[7], "runtime_ms")? as u64,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub method: String,
    pub m: usize,
    pub runs: usize,
    pub mean: [f64; 3],
    /// Sample standard deviation; `None` for single-run groups.
    pub std: Option<[f64; 3]>,
}

/// Table row order within one M, mirroring the usual baseline-to-bound
/// reading direction.
fn method_rank(method: &str) -> (u8, &str) {
    match method {
        "random" => (0, method),
        "covdens" => (1, method),
        "greedy" => (2, method),
        "brute" => (3, method),
        other => (4, other),
    }
}

fn display_name(method: &str) -> String {
    match method {
        "random" => "Random".into(),
        "covdens" => "Coverage+density".into(),
        "greedy" => "Ours (greedy)".into(),
        "brute" => "Upper bound (brute)".into(),
        other => other.into(),
    }
}

pub fn aggregate(rows: &[EvalRow]) -> Result<Vec<Aggregate>> {
    if rows.is_empty() {
        return Err(Error::Param("no evaluation rows to report".into()));
    }
    let mut keys: Vec<(usize, u8, String)> = rows
        .iter()
        .map(|r| {
            let (rank, _) = method_rank(&r.method);
            (r.m, rank, r.method.clone())
        })
        .collect();
    keys.sort();
    keys.dedup();

    let mut out = Vec::with_capacity(keys.len());
    for (m, _, method) in keys {
        let group: Vec<&EvalRow> = rows
            .iter()
            .filter(|r| r.m == m && r.method == method)
            .collect();
        let n = group.len();
        let mut mean = [0.0; 3];
        for r in &group {
            for t in 0..3 {
                mean[t] += r.ap[t];
            }
        }
        for v in &mut mean {
            *v /= n as f64;
        }
        let std = if n > 1 {
            let mut var = [0.0; 3];
            for r in &group {
                for t in 0..3 {
                    var[t] += (r.ap[t] - mean[t]).powi(2);
                }
            }
            Some([
                (var[0] / (n - 1) as f64).sqrt(),
                (var[1] / (n - 1) as f64).sqrt(),
                (var[2] / (n - 1) as f64).sqrt(),
            ])
        } else {
            None
        };
        out.push(Aggregate {
            method,
            m,
            runs: n,
            mean,
            std,
        });
    }
    Ok(out)
}

fn cell(mean: f64, std: Option<f64>) -> String {
    match std {
        Some(s) => format!("{mean:.3} ± {s:.3}"),
        None => format!("{mean:.3}"),
    }
}

pub fn render_markdown(aggs: &[Aggregate]) -> String {
    let mut s = String::from("# Placement evaluation\n\n");
    s.push_str("| M | Method | AP@0.3 | AP@0.5 | AP@0.7 | Runs |\n");
    s.push_str("|--:|---|---|---|---|--:|\n");
    for a in aggs {
        s.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} |\n",
            a.m,
            display_name(&a.method),
            cell(a.mean[0], a.std.map(|x| x[0])),
            cell(a.mean[1], a.std.map(|x| x[1])),
            cell(a.mean[2], a.std.map(|x| x[2])),
            a.runs
        ));
    }
    s
}

pub fn render_csv(aggs: &[Aggregate]) -> String {
    let mut s = String::from(
        "method,m,runs,ap_03_mean,ap_03_std,ap_05_mean,ap_05_std,ap_07_mean,ap_07_std\n",
    );
    for a in aggs {
        let std_cell = |t: usize| a.std.map(|x| x[t].to_string()).unwrap_or_default();
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            a.method,
            a.m,
            a.runs,
            a.mean[0],
            std_cell(0),
            a.mean[1],
            std_cell(1),
            a.mean[2],
            std_cell(2)
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: &str, m: usize, seed: u64, ap05: f64) -> EvalRow {
        EvalRow {
            method: method.into(),
            m,
            seed,
            ap: [ap05 + 0.1, ap05, ap05 - 0.1],
            frames: "0;1".into(),
            runtime_ms: 7,
        }
    }

    #[test]
    fn rows_round_trip_through_csv() {
        let rows = vec![row("greedy", 2, 0, 0.75), row("random", 2, 1, 0.5)];
        let mut text = String::from(EVAL_CSV_HEADER);
        text.push('\n');
        for r in &rows {
            text.push_str(&r.to_csv_line());
            text.push('\n');
        }
        assert_eq!(parse_rows(&text).unwrap(), rows);
    }

    #[test]
    fn header_and_field_count_are_enforced() {
        assert!(matches!(parse_rows("nope\n"), Err(Error::Parse(_))));
        let short = format!("{EVAL_CSV_HEADER}\ngreedy,2,0\n");
        assert!(matches!(parse_rows(&short), Err(Error::Parse(_))));
    }

    #[test]
    fn multi_seed_groups_get_mean_and_sample_std() {
        // Three random seeds at ap_05 of 0.5, 0.7, 0.6: mean 0.6 and
        // sample std sqrt((0.01 + 0.01 + 0) / 2) = 0.1.
        let rows = vec![
            row("random", 2, 0, 0.5),
            row("random", 2, 1, 0.7),
            row("random", 2, 2, 0.6),
            row("greedy", 2, 0, 0.75),
        ];
        let aggs = aggregate(&rows).unwrap();
        assert_eq!(aggs.len(), 2);
        assert_eq!(aggs[0].method, "random");
        assert_eq!(aggs[0].runs, 3);
        assert!((aggs[0].mean[1] - 0.6).abs() < 1e-12);
        assert!((aggs[0].std.unwrap()[1] - 0.1).abs() < 1e-12);
        assert_eq!(aggs[1].method, "greedy");
        assert_eq!(aggs[1].std, None);
    }

    #[test]
    fn ordering_is_m_then_method_rank() {
        let rows = vec![
            row("brute", 3, 0, 0.8),
            row("greedy", 2, 0, 0.7),
            row("random", 3, 0, 0.5),
            row("covdens", 2, 0, 0.6),
        ];
        let order: Vec<(usize, String)> = aggregate(&rows)
            .unwrap()
            .into_iter()
            .map(|a| (a.m, a.method))
            .collect();
        assert_eq!(
            order,
            vec![
                (2, "covdens".to_string()),
                (2, "greedy".to_string()),
                (3, "random".to_string()),
                (3, "brute".to_string()),
            ]
        );
    }

    #[test]
    fn empty_input_is_a_parameter_error() {
        assert!(matches!(aggregate(&[]), Err(Error::Param(_))));
    }

    #[test]
    fn markdown_omits_std_for_single_runs() {
        let rows = vec![
            row("random", 2, 0, 0.5),
            row("random", 2, 1, 0.7),
            row("greedy", 2, 0, 0.75),
        ];
        let md = render_markdown(&aggregate(&rows).unwrap());
        assert!(md.contains("| Random | 0.700 ± 0.141"));
        assert!(md.contains("| Ours (greedy) | 0.850 | 0.750 | 0.650 | 1 |"));
        let csv = render_csv(&aggregate(&rows).unwrap());
        assert!(csv.contains("greedy,2,1,0.85,,0.75,,0.65,\n"));
    }
}
