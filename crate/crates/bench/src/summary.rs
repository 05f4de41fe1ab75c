//! Per-iteration quantiles across seeds.

use proxkit::SolverReport;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SummaryError {
    #[error("no reports to summarize")]
    EmptyInput,
}

/// One solver arm: a label and its per-seed reports.
pub struct Arm<'a> {
    pub name: &'a str,
    pub reports: Vec<&'a SolverReport>,
}

pub const SUMMARY_HEADER: &str = "arm,iter,objective_median,objective_q25,objective_q75,\
stationarity_median,stationarity_q25,stationarity_q75,grad_evals_median";

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn padded(values: &[f64], t: usize) -> f64 {
    values.get(t).or(values.last()).copied().unwrap_or(f64::NAN)
}

fn quartiles(mut col: Vec<f64>) -> [f64; 3] {
    col.sort_by(f64::total_cmp);
    [quantile(&col, 0.5), quantile(&col, 0.25), quantile(&col, 0.75)]
}

/// Summary CSV: for every arm and iteration, median and quartiles of objective
/// and stationarity and the median work across seeds. Shorter runs are padded
/// with their final values. With `ratio`, a last row `ratio` carries it in
/// the `grad_evals_median` column.
pub fn emit_summary(arms: &[Arm<'_>], ratio: Option<f64>) -> Result<String, SummaryError> {
    if arms.is_empty() || arms.iter().any(|a| a.reports.is_empty()) {
        return Err(SummaryError::EmptyInput);
    }
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for arm in arms {
        let len = arm.reports.iter().map(|r| r.len()).max().unwrap_or(0);
        for t in 0..len {
            let obj = quartiles(arm.reports.iter().map(|r| padded(&r.objective_history, t)).collect());
            let stat = quartiles(arm.reports.iter().map(|r| padded(&r.stationarity_history, t)).collect());
            let work: Vec<f64> = arm.reports.iter().map(|r| *r.work.get(t).or(r.work.last()).unwrap_or(&0) as f64).collect();
            let work = quartiles(work)[0];
            out.push_str(&format!(
                "{},{t},{},{},{},{},{},{},{}\n",
                arm.name,
                fmt_real(obj[0]),
                fmt_real(obj[1]),
                fmt_real(obj[2]),
                fmt_real(stat[0]),
                fmt_real(stat[1]),
                fmt_real(stat[2]),
                fmt_real(work)
            ));
        }
    }
    if let Some(r) = ratio {
        out.push_str(&format!("ratio,,,,,,,,{}\n", fmt_real(r)));
    }
    Ok(out)
}

/// 17 significant digits in scientific notation.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proxkit::Vector;

    fn constant(v: f64, len: usize) -> SolverReport {
        let x = Vector::zeros(1);
        let mut r = SolverReport::new("t", &x, 1);
        for t in 0..len {
            r.record(&x, v, 10.0 * v, t as u64);
        }
        r
    }

    fn rows(csv: &str) -> Vec<Vec<String>> {
        csv.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
    }

    #[test]
    fn single_report_summarizes_to_itself() {
        let mut r = constant(0.0, 0);
        let x = Vector::zeros(1);
        for (t, v) in [3.0, 1.5, 0.25].into_iter().enumerate() {
            r.record(&x, v, v / 2.0, 10 * t as u64);
        }
        let csv = emit_summary(&[Arm { name: "solver", reports: vec![&r] }], None).unwrap();
        for (t, row) in rows(&csv).iter().enumerate() {
            let v: Vec<f64> = row[2..].iter().map(|s| s.parse().unwrap()).collect();
            assert_eq!(v[0..3], [r.objective_history[t]; 3]);
            assert_eq!(v[3..6], [r.stationarity_history[t]; 3]);
            assert_eq!(v[6], r.work[t] as f64);
        }
    }

    #[test]
    fn median_of_three_constants() {
        let rs = [constant(1.0, 4), constant(2.0, 4), constant(3.0, 4)];
        let csv = emit_summary(&[Arm { name: "a", reports: rs.iter().collect() }], Some(7.5)).unwrap();
        let rows = rows(&csv);
        assert_eq!(rows.len(), 5);
        for row in &rows[..4] {
            assert_eq!(row[2].parse::<f64>().unwrap(), 2.0);
            assert_eq!(row[3].parse::<f64>().unwrap(), 1.5);
            assert_eq!(row[4].parse::<f64>().unwrap(), 2.5);
        }
        assert_eq!(rows[4][0], "ratio");
        assert_eq!(rows[4][8].parse::<f64>().unwrap(), 7.5);
    }

    #[test]
    fn short_runs_are_padded_with_final_values() {
        let rs = [constant(1.0, 2), constant(5.0, 5)];
        let csv = emit_summary(&[Arm { name: "a", reports: rs.iter().collect() }], None).unwrap();
        let rows = rows(&csv);
        assert_eq!(rows.len(), 5);
        assert_eq!(rows[4][2].parse::<f64>().unwrap(), 3.0);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert_eq!(emit_summary(&[], None), Err(SummaryError::EmptyInput));
        assert_eq!(emit_summary(&[Arm { name: "a", reports: vec![] }], None), Err(SummaryError::EmptyInput));
    }

    #[test]
    fn reals_have_seventeen_significant_digits() {
        let s = fmt_real(0.1);
        assert_eq!(s, "1.0000000000000001e-1");
        assert_eq!(s.parse::<f64>().unwrap(), 0.1);
    }
}
