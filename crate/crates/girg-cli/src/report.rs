//! Experiment reports: estimate rows, slope fits with predicted exponents,
//! and pass/fail checks, serialized as CSV (rows) or JSON (everything).
//! Reports carry no timestamps, so reruns with the same config and seed are
//! byte-identical.

use std::fmt::Write as _;

use girg::analytics::AsymptoticPrediction;
use girg::estimator::SlopeFit;
use girg::EdgeBudget;

pub const CSV_HEADER: &str =
    "experiment,d,gamma,delta,lambda,r,R,u,k,W,trials,successes,p_hat,ci_low,ci_high,seed,trunc_tail";

#[derive(Debug, Clone)]
pub struct EstimateRow {
    pub experiment: String,
    pub d: u32,
    pub gamma: f64,
    /// `None` encodes the hard profile and prints as `inf`.
    pub delta: Option<f64>,
    pub lambda: f64,
    pub r: Option<f64>,
    pub big_r: f64,
    pub u: Option<f64>,
    pub k: EdgeBudget,
    pub window: f64,
    pub trials: u64,
    pub successes: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    pub trunc_tail: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct PredictedExponents {
    pub r_exp: f64,
    pub big_r_exp: f64,
    pub u_exp: f64,
    pub log_big_r_pow: f64,
    pub log_r_pow: f64,
    pub capped: bool,
}

impl From<&AsymptoticPrediction> for PredictedExponents {
    fn from(p: &AsymptoticPrediction) -> Self {
        PredictedExponents {
            r_exp: p.inner_exp,
            big_r_exp: p.outer_exp,
            u_exp: p.mark_exp,
            log_big_r_pow: p.log_outer_pow,
            log_r_pow: p.log_inner_pow,
            capped: p.capped_at_one,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SlopeReport {
    pub label: String,
    /// Variable the fit ran over ("R" or "r").
    pub scale: &'static str,
    pub fit: SlopeFit,
    pub predicted: Option<PredictedExponents>,
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub label: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub experiment: String,
    pub rows: Vec<EstimateRow>,
    pub fits: Vec<SlopeReport>,
    pub checks: Vec<CheckReport>,
    pub passed: bool,
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn fmt_budget(k: EdgeBudget) -> String {
    match k {
        EdgeBudget::Limited(k) => k.to_string(),
        EdgeBudget::Unbounded => "inf".to_string(),
    }
}

impl Report {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                row.experiment,
                row.d,
                row.gamma,
                row.delta.map(|d| d.to_string()).unwrap_or_else(|| "inf".into()),
                row.lambda,
                fmt_opt(row.r),
                row.big_r,
                fmt_opt(row.u),
                fmt_budget(row.k),
                row.window,
                row.trials,
                row.successes,
                row.p_hat,
                row.ci_low,
                row.ci_high,
                row.seed,
                row.trunc_tail,
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut w = JsonWriter::new();
        w.open_object();
        w.str_field("experiment", &self.experiment);
        w.bool_field("passed", self.passed);
        w.key("rows");
        w.open_array();
        for row in &self.rows {
            w.open_object();
            w.str_field("experiment", &row.experiment);
            w.num_field("d", row.d as f64);
            w.num_field("gamma", row.gamma);
            match row.delta {
                Some(d) => w.num_field("delta", d),
                None => w.str_field("delta", "inf"),
            }
            w.num_field("lambda", row.lambda);
            w.opt_num_field("r", row.r);
            w.num_field("R", row.big_r);
            w.opt_num_field("u", row.u);
            match row.k {
                EdgeBudget::Limited(k) => w.num_field("k", k as f64),
                EdgeBudget::Unbounded => w.str_field("k", "inf"),
            }
            w.num_field("W", row.window);
            w.num_field("trials", row.trials as f64);
            w.num_field("successes", row.successes as f64);
            w.num_field("p_hat", row.p_hat);
            w.num_field("ci_low", row.ci_low);
            w.num_field("ci_high", row.ci_high);
            w.num_field("seed", row.seed as f64);
            w.num_field("trunc_tail", row.trunc_tail);
            w.close_object();
        }
        w.close_array();
        w.key("fits");
        w.open_array();
        for fit in &self.fits {
            w.open_object();
            w.str_field("label", &fit.label);
            w.str_field("scale", fit.scale);
            w.num_field("slope", fit.fit.slope);
            w.num_field("slope_stderr", fit.fit.slope_stderr);
            w.num_field("intercept", fit.fit.intercept);
            w.num_field("points_used", fit.fit.points_used as f64);
            if let Some(p) = fit.predicted {
                w.key("predicted");
                w.open_object();
                w.num_field("r_exp", p.r_exp);
                w.num_field("R_exp", p.big_r_exp);
                w.num_field("u_exp", p.u_exp);
                w.num_field("logR_pow", p.log_big_r_pow);
                w.num_field("logr_pow", p.log_r_pow);
                w.bool_field("capped", p.capped);
                w.close_object();
            }
            w.close_object();
        }
        w.close_array();
        w.key("checks");
        w.open_array();
        for check in &self.checks {
            w.open_object();
            w.str_field("label", &check.label);
            w.bool_field("passed", check.passed);
            w.str_field("detail", &check.detail);
            w.close_object();
        }
        w.close_array();
        w.close_object();
        w.finish()
    }

    /// Human-readable run summary: fits, predictions and checks.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "experiment: {} ({} rows)", self.experiment, self.rows.len());
        for f in &self.fits {
            let _ = write!(
                out,
                "  fit {}: slope({}) = {:.4} +- {:.4} over {} points",
                f.label, f.scale, f.fit.slope, f.fit.slope_stderr, f.fit.points_used
            );
            if let Some(p) = f.predicted {
                let _ = write!(
                    out,
                    "  [predicted r_exp={} R_exp={} u_exp={} logR_pow={} logr_pow={} capped={}]",
                    p.r_exp, p.big_r_exp, p.u_exp, p.log_big_r_pow, p.log_r_pow, p.capped
                );
            }
            out.push('\n');
        }
        for c in &self.checks {
            let _ = writeln!(
                out,
                "  check {}: {} ({})",
                c.label,
                if c.passed { "pass" } else { "FAIL" },
                c.detail
            );
        }
        let _ = writeln!(out, "overall: {}", if self.passed { "pass" } else { "FAIL" });
        out
    }
}

/// Tiny streaming JSON writer (keys are plain identifiers, strings only need
/// basic escaping).
struct JsonWriter {
    out: String,
    need_comma: Vec<bool>,
}

impl JsonWriter {
    fn new() -> Self {
        JsonWriter { out: String::new(), need_comma: Vec::new() }
    }

    fn sep(&mut self) {
        if let Some(last) = self.need_comma.last_mut() {
            if *last {
                self.out.push(',');
            }
            *last = true;
        }
    }

    fn open_object(&mut self) {
        self.sep();
        self.out.push('{');
        self.need_comma.push(false);
    }

    fn close_object(&mut self) {
        self.out.push('}');
        self.need_comma.pop();
    }

    fn open_array(&mut self) {
        self.out.push('[');
        self.need_comma.push(false);
    }

    fn close_array(&mut self) {
        self.out.push(']');
        self.need_comma.pop();
    }

    fn key(&mut self, key: &str) {
        self.sep();
        let _ = write!(self.out, "\"{key}\":");
        if let Some(last) = self.need_comma.last_mut() {
            *last = false;
        }
    }

    fn escape(s: &str) -> String {
        let mut out = String::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '"' => out.push_str("\\\""),
                '\\' => out.push_str("\\\\"),
                '\n' => out.push_str("\\n"),
                '\t' => out.push_str("\\t"),
                '\r' => out.push_str("\\r"),
                c if (c as u32) < 0x20 => {
                    let _ = write!(out, "\\u{:04x}", c as u32);
                }
                c => out.push(c),
            }
        }
        out
    }

    fn str_field(&mut self, key: &str, value: &str) {
        self.key(key);
        let _ = write!(self.out, "\"{}\"", Self::escape(value));
        *self.need_comma.last_mut().unwrap() = true;
    }

    fn num_field(&mut self, key: &str, value: f64) {
        self.key(key);
        if value.is_finite() {
            let _ = write!(self.out, "{value}");
        } else {
            let _ = write!(self.out, "\"{value}\"");
        }
        *self.need_comma.last_mut().unwrap() = true;
    }

    fn opt_num_field(&mut self, key: &str, value: Option<f64>) {
        self.key(key);
        match value {
            Some(v) => {
                let _ = write!(self.out, "{v}");
            }
            None => self.out.push_str("null"),
        }
        *self.need_comma.last_mut().unwrap() = true;
    }

    fn bool_field(&mut self, key: &str, value: bool) {
        self.key(key);
        let _ = write!(self.out, "{value}");
        *self.need_comma.last_mut().unwrap() = true;
    }

    fn finish(self) -> String {
        self.out
    }
}
