//! CSV tables and SVG line charts.
//!
//! Numbers are printed with 12 significant digits; divergent values print
//! as `inf`. Every file starts with a `# config-hash:` comment line.

use std::fmt::Write as _;
use std::path::Path;

use crate::experiments::{ConvergenceTable, GridResult, PhaseResult, StsStudy};
use crate::{Error, Result};

/// `v` with 12 significant digits, shortest of fixed or scientific form.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    fmt_num(v.unwrap_or(f64::INFINITY))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self, config_hash: &str) -> String {
        let mut out = format!("# config-hash: {config_hash}\n");
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j].as_str()).collect())
    }
}

pub fn sweep_table(g: &GridResult) -> CsvTable {
    let mut t = CsvTable::new([
        "map",
        "variable",
        "x",
        "n",
        "n_samples",
        "lambda",
        "theory_bias_sq",
        "theory_variance",
        "theory_noise",
        "theory_total",
        "alpha",
        "delta",
        "rank_effective",
        "empirical_mean",
        "empirical_std_error",
        "trials",
        "flagged",
    ]);
    for p in &g.points {
        let th = p.theory;
        let (mean, se, trials) = match &p.empirical {
            Some(e) => (fmt_num(e.mean), fmt_num(e.std_error), e.trials.to_string()),
            None => (String::new(), String::new(), "0".into()),
        };
        t.push(vec![
            g.label.clone(),
            g.variable.name().to_string(),
            fmt_num(p.x),
            p.n.to_string(),
            p.n_samples.to_string(),
            fmt_num(p.lambda),
            fmt_opt(th.map(|r| r.bias_sq)),
            fmt_opt(th.map(|r| r.variance)),
            fmt_opt(th.map(|r| r.noise)),
            fmt_opt(th.map(|r| r.total)),
            fmt_opt(p.alpha),
            fmt_opt(p.delta),
            p.rank_effective.to_string(),
            mean,
            se,
            trials,
            u8::from(p.flagged).to_string(),
        ]);
    }
    t
}

pub fn phase_table(p: &PhaseResult) -> CsvTable {
    let mut t = CsvTable::new([
        "n_samples",
        "rho",
        "esn_lambda",
        "esn_theory_total",
        "esn_empirical_mean",
        "esn_empirical_std_error",
        "ridge_lambda",
        "ridge_theory_total",
        "ridge_empirical_mean",
        "ridge_empirical_std_error",
        "theory_winner",
        "empirical_winner",
        "decisive",
        "non_unimodal",
    ]);
    let emp = |e: &Option<crate::empirical::EmpiricalRisk>| match e {
        Some(e) => (fmt_num(e.mean), fmt_num(e.std_error)),
        None => (String::new(), String::new()),
    };
    for c in &p.cells {
        let (em, es) = emp(&c.esn.empirical);
        let (rm, rs) = emp(&c.ridge.empirical);
        t.push(vec![
            c.n_samples.to_string(),
            fmt_num(c.rho),
            fmt_num(c.esn.lambda),
            fmt_num(c.esn.theory.total),
            em,
            es,
            fmt_num(c.ridge.lambda),
            fmt_num(c.ridge.theory.total),
            rm,
            rs,
            c.theory_winner.name().into(),
            c.empirical_winner.map(|w| w.name().to_string()).unwrap_or_default(),
            u8::from(c.decisive).to_string(),
            u8::from(c.esn.non_unimodal || c.ridge.non_unimodal).to_string(),
        ]);
    }
    t
}

pub fn frontier_table(p: &PhaseResult) -> CsvTable {
    let mut t = CsvTable::new(["source", "n_samples", "rho"]);
    for (source, pts) in [("theory", &p.theory_frontier), ("empirical", &p.empirical_frontier)] {
        for f in pts {
            t.push(vec![source.into(), f.n_samples.to_string(), fmt_num(f.rho)]);
        }
    }
    t
}

pub fn sts_table(s: &StsStudy) -> CsvTable {
    let t_len = s.limit.len();
    let mut header: Vec<String> = ["n", "deviation", "mean_deviation", "offdiag_12"].map(String::from).to_vec();
    header.extend((1..=t_len).map(|i| format!("mean_diag_{i}")));
    header.extend((1..=t_len).map(|i| format!("limit_diag_{i}")));
    let mut t = CsvTable::new(header);
    for r in &s.rows {
        let mut row = vec![
            r.n.to_string(),
            fmt_num(r.deviation),
            fmt_num(r.mean_deviation),
            fmt_num(r.offdiag_12),
        ];
        row.extend((0..t_len).map(|i| fmt_num(r.mean_sts[(i, i)])));
        row.extend(s.limit.iter().map(|&v| fmt_num(v)));
        t.push(row);
    }
    t
}

pub fn sts_fit_table(s: &StsStudy) -> CsvTable {
    let mut t = CsvTable::new(["slope", "n_min", "n_max"]);
    let n_min = s.rows.first().map(|r| r.n).unwrap_or(0);
    let n_max = s.rows.last().map(|r| r.n).unwrap_or(0);
    t.push(vec![fmt_num(s.slope), n_min.to_string(), n_max.to_string()]);
    t
}

pub fn convergence_table(c: &ConvergenceTable) -> CsvTable {
    let mut t = CsvTable::new([
        "t",
        "n",
        "n_samples",
        "theory_total",
        "empirical_mean",
        "empirical_std_error",
        "rel_gap",
        "within_noise",
    ]);
    for r in &c.rows {
        t.push(vec![
            r.size.t.to_string(),
            r.size.n.to_string(),
            r.size.n_samples.to_string(),
            fmt_num(r.theory.total),
            fmt_num(r.empirical.mean),
            fmt_num(r.empirical.std_error),
            fmt_num(r.rel_gap),
            u8::from(r.within_noise).to_string(),
        ]);
    }
    t
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents).map_err(Error::from)
}

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Minimal SVG line chart with axes, tick labels and a legend. Non-finite
/// points are skipped; `log_y` plots `log10` of positive values.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], log_y: bool, config_hash: &str) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 150.0, 40.0, 50.0);
    let tf = |y: f64| if log_y { y.log10() } else { y };
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite() && (!log_y || *y > 0.0))
                .map(|&(x, y)| (x, tf(y)))
                .collect()
        })
        .collect();
    let all: Vec<&(f64, f64)> = pts.iter().flatten().collect();
    let range = |f: fn(&(f64, f64)) -> f64| {
        let lo = all.iter().map(|p| f(p)).fold(f64::INFINITY, f64::min);
        let hi = all.iter().map(|p| f(p)).fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    let (x0, x1) = range(|p| p.0);
    let (y0, y1) = range(|p| p.1);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(s, "<!-- config-hash: {config_hash} -->");
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M{left},{top} V{} H{}" fill="none" stroke="black"/>"#,
        top + ph,
        left + pw
    );
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let ylab = if log_y { format!("1e{fy:.1}") } else { short(fy) };
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(fx),
            top + ph + 18.0,
            short(fx)
        );
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, left - 6.0, sy(fy) + 4.0, ylab);
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        h - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        escape(y_label)
    );
    for (i, (ser, p)) in series.iter().zip(&pts).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if !p.is_empty() {
            let d: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                d.join(" ")
            );
        }
        let ly = top + 16.0 * i as f64 + 8.0;
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
            left + pw + 10.0,
            left + pw + 30.0
        );
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, left + pw + 35.0, ly + 4.0, escape(&ser.name));
    }
    s.push_str("</svg>\n");
    s
}

fn short(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-2..1e4).contains(&a) {
        format!("{v:.1e}")
    } else {
        trim_zeros(&format!("{v:.3}"))
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(1.170820393249937), "1.17082039325");
        assert_eq!(fmt_num(-0.25), "-0.25");
        assert_eq!(fmt_num(1234567.0), "1234567");
        assert_eq!(fmt_num(1e-7), "1e-7");
        assert_eq!(fmt_num(6.02214076e23), "6.02214076e23");
        assert_eq!(fmt_num(f64::INFINITY), "inf");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(0.000123456789012345), "0.000123456789012");
    }

    #[test]
    fn table_render() {
        let mut t = CsvTable::new(["a", "b"]);
        t.push(vec!["1".into(), "inf".into()]);
        assert_eq!(t.render("abc"), "# config-hash: abc\na,b\n1,inf\n");
        assert_eq!(t.column("b").unwrap(), vec!["inf"]);
    }

    #[test]
    fn chart_skips_non_finite() {
        let s = Series {
            name: "a<b".into(),
            points: vec![(0.0, 1.0), (1.0, f64::INFINITY), (2.0, 3.0)],
        };
        let svg = line_chart("t", "x", "y", &[s], false, "h");
        assert!(svg.contains("a&lt;b"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.starts_with("<!-- config-hash: h -->"));
    }
}
