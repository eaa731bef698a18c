//! Map accuracy assessment: error matrices drawn by stratified random
//! sampling, and the statistics derived from them.
//!
//! Rows of an [`ErrorMatrix`] are classified classes, columns reference
//! classes. Undefined statistics (an empty row or column) are `None`,
//! never 0.

use std::fmt::Write as _;
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::fsio;
use crate::math::Rng;
use crate::sampling::LabelMap;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorMatrix {
    k: usize,
    counts: Vec<u64>,
    names: Vec<String>,
}

impl ErrorMatrix {
    pub fn zeros(names: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::argument("an error matrix needs at least one class"));
        }
        if let Some(n) = names.iter().find(|n| n.contains(',') || n.contains('\n') || n.trim().is_empty()) {
            return Err(Error::argument(format!("class name {n:?} cannot be stored in a matrix file")));
        }
        let k = names.len();
        Ok(ErrorMatrix {
            k,
            counts: vec![0; k * k],
            names,
        })
    }

    /// Classes named `0..k`.
    pub fn unnamed(k: usize) -> Result<Self> {
        Self::zeros((0..k).map(|i| i.to_string()).collect())
    }

    /// `rows[i][j]` is the count classified `i` with reference `j`.
    pub fn from_rows(rows: &[Vec<u64>], names: Vec<String>) -> Result<Self> {
        let mut m = Self::zeros(names)?;
        if rows.len() != m.k || rows.iter().any(|r| r.len() != m.k) {
            return Err(Error::shape(format!("error matrix rows do not form a {0}x{0} square", m.k)));
        }
        for (i, r) in rows.iter().enumerate() {
            m.counts[i * m.k..(i + 1) * m.k].copy_from_slice(r);
        }
        Ok(m)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, classified: usize, reference: usize) -> u64 {
        self.counts[classified * self.k + reference]
    }

    pub fn set(&mut self, classified: usize, reference: usize, value: u64) {
        self.counts[classified * self.k + reference] = value;
    }

    pub fn add(&mut self, classified: usize, reference: usize) {
        self.counts[classified * self.k + reference] += 1;
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.k).map(<[u64]>::to_vec).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn diagonal_sum(&self) -> u64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }

    pub fn row_total(&self, i: usize) -> u64 {
        (0..self.k).map(|j| self.get(i, j)).sum()
    }

    pub fn col_total(&self, j: usize) -> u64 {
        (0..self.k).map(|i| self.get(i, j)).sum()
    }

    pub fn row_totals(&self) -> Vec<u64> {
        (0..self.k).map(|i| self.row_total(i)).collect()
    }

    pub fn col_totals(&self) -> Vec<u64> {
        (0..self.k).map(|j| self.col_total(j)).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.k).all(|i| (0..self.k).all(|j| i == j || self.get(i, j) == 0))
    }

    /// Relabels classes: new class `n` is old class `perm[n]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.k];
        if perm.len() != self.k || perm.iter().any(|&p| p >= self.k || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::argument("not a permutation of the classes"));
        }
        let names = perm.iter().map(|&p| self.names[p].clone()).collect();
        let mut m = Self::zeros(names)?;
        for (a, &pa) in perm.iter().enumerate() {
            for (b, &pb) in perm.iter().enumerate() {
                m.set(a, b, self.get(pa, pb));
            }
        }
        Ok(m)
    }

    fn check_class(&self, i: usize) -> Result<()> {
        if i >= self.k {
            return Err(Error::Index(format!("class {i} outside a {}-class matrix", self.k)));
        }
        Ok(())
    }

    /// Comma-separated text: a header of reference names, then one row per
    /// classified class led by its name.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("classified\\reference");
        for n in &self.names {
            s.push(',');
            s.push_str(n);
        }
        s.push('\n');
        for i in 0..self.k {
            s.push_str(&self.names[i]);
            for j in 0..self.k {
                let _ = write!(s, ",{}", self.get(i, j));
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::format("empty error matrix file"))?;
        let names: Vec<String> = header.split(',').skip(1).map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::with_capacity(names.len());
        for (i, line) in lines.enumerate() {
            let mut cells = line.split(',').map(str::trim);
            let row_name = cells.next().unwrap_or("");
            if names.get(i).map(String::as_str) != Some(row_name) {
                return Err(Error::format(format!(
                    "row {} is named {row_name:?}, expected {:?}",
                    i + 1,
                    names.get(i)
                )));
            }
            let row = cells
                .map(|c| c.parse::<u64>().map_err(|e| Error::format(format!("count {c:?} in row {row_name}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows, names).map_err(|e| Error::format(e.to_string()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fsio::write_atomic(path, self.to_csv().as_bytes())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv(&fsio::read_text(path)?)
    }
}

fn nonempty(m: &ErrorMatrix) -> Result<f64> {
    match m.total() {
        0 => Err(Error::argument("error matrix is empty")),
        n => Ok(n as f64),
    }
}

/// Diagonal sum over the grand total.
pub fn overall_accuracy(m: &ErrorMatrix) -> Result<f64> {
    Ok(m.diagonal_sum() as f64 / nonempty(m)?)
}

/// Cohen's kappa: `(N·Σx_ii − Σ r_i·c_i) / (N² − Σ r_i·c_i)`.
pub fn overall_kappa(m: &ErrorMatrix) -> Result<f64> {
    let n = nonempty(m)?;
    let chance: f64 = (0..m.k).map(|i| m.row_total(i) as f64 * m.col_total(i) as f64).sum();
    let denom = n * n - chance;
    if denom == 0.0 {
        return Err(Error::UndefinedKappa("chance agreement is total".into()));
    }
    Ok((n * m.diagonal_sum() as f64 - chance) / denom)
}

/// `(PA, UA)` of class `i`: the diagonal count over the reference
/// (column) total and over the classified (row) total.
pub fn producer_user_accuracy(m: &ErrorMatrix, i: usize) -> Result<(Option<f64>, Option<f64>)> {
    m.check_class(i)?;
    let x = m.get(i, i) as f64;
    let ratio = |t: u64| (t > 0).then(|| x / t as f64);
    Ok((ratio(m.col_total(i)), ratio(m.row_total(i))))
}

/// Row-conditioned kappa of class `i`:
/// `(N·x_ii − r_i·c_i) / (N·r_i − r_i·c_i)`.
pub fn conditional_kappa(m: &ErrorMatrix, i: usize) -> Result<f64> {
    m.check_class(i)?;
    let n = nonempty(m)?;
    let (r, c) = (m.row_total(i) as f64, m.col_total(i) as f64);
    let denom = n * r - r * c;
    if denom == 0.0 {
        return Err(Error::UndefinedKappa(format!("class {i} has an empty row or fills its column")));
    }
    Ok((n * m.get(i, i) as f64 - r * c) / denom)
}

/// Rounds half away from zero to `decimals` places.
pub fn round_to(x: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (x * s).round() / s
}

/// Mean and sample standard deviation; the deviation needs two values.
pub fn mean_and_sd(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.len() > 1)
        .then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(mean), sd)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssessmentReport {
    pub names: Vec<String>,
    pub total: u64,
    pub overall_accuracy: f64,
    pub overall_kappa: Option<f64>,
    pub producer_accuracy: Vec<Option<f64>>,
    pub user_accuracy: Vec<Option<f64>>,
    pub conditional_kappa: Vec<Option<f64>>,
    pub row_totals: Vec<u64>,
    pub col_totals: Vec<u64>,
    /// Mean of the per-class conditional kappas as displayed (two
    /// decimals), the convention of published summary tables.
    pub mean_kappa: Option<f64>,
    /// Sample standard deviation of the displayed conditional kappas.
    pub kappa_sd: Option<f64>,
    /// Mean of the unrounded conditional kappas.
    pub mean_kappa_exact: Option<f64>,
}

pub fn full_report(m: &ErrorMatrix) -> Result<AssessmentReport> {
    let overall_accuracy = overall_accuracy(m)?;
    let overall_kappa = match overall_kappa(m) {
        Ok(k) => Some(k),
        Err(Error::UndefinedKappa(_)) => None,
        Err(e) => return Err(e),
    };
    let mut producer = Vec::with_capacity(m.k);
    let mut user = Vec::with_capacity(m.k);
    let mut kappas = Vec::with_capacity(m.k);
    for i in 0..m.k {
        let (pa, ua) = producer_user_accuracy(m, i)?;
        producer.push(pa);
        user.push(ua);
        kappas.push(match conditional_kappa(m, i) {
            Ok(k) => Some(k),
            Err(Error::UndefinedKappa(_)) => None,
            Err(e) => return Err(e),
        });
    }
    let defined: Vec<f64> = kappas.iter().flatten().copied().collect();
    let displayed: Vec<f64> = defined.iter().map(|&k| round_to(k, 2)).collect();
    let (mean_kappa, kappa_sd) = mean_and_sd(&displayed);
    Ok(AssessmentReport {
        names: m.names.clone(),
        total: m.total(),
        overall_accuracy,
        overall_kappa,
        producer_accuracy: producer,
        user_accuracy: user,
        conditional_kappa: kappas,
        row_totals: m.row_totals(),
        col_totals: m.col_totals(),
        mean_kappa,
        kappa_sd,
        mean_kappa_exact: mean_and_sd(&defined).0,
    })
}

fn fmt_opt(v: Option<f64>, scale: f64, decimals: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{:.*}", decimals, x * scale))
}

impl AssessmentReport {
    /// Plain-text layout of a published error-matrix table: the matrix with
    /// totals, per-class PA/UA/conditional kappa, then OA and kappa.
    pub fn render(&self, m: &ErrorMatrix, title: &str) -> String {
        let w = self.names.iter().map(String::len).max().unwrap_or(5).max(16);
        let mut s = format!("{title}\nrows: classified data, columns: reference data\n\n");
        let _ = write!(s, "{:w$}", "class");
        for j in 0..m.k {
            let _ = write!(s, " {:>6}", format!("c{j}"));
        }
        let _ = writeln!(s, " {:>7} {:>8} {:>8} {:>7}", "total", "PA(%)", "UA(%)", "kappa");
        for i in 0..m.k {
            let _ = write!(s, "{:w$}", self.names[i]);
            for j in 0..m.k {
                let _ = write!(s, " {:>6}", m.get(i, j));
            }
            let _ = writeln!(
                s,
                " {:>7} {:>8} {:>8} {:>7}",
                self.row_totals[i],
                fmt_opt(self.producer_accuracy[i], 100.0, 2),
                fmt_opt(self.user_accuracy[i], 100.0, 2),
                fmt_opt(self.conditional_kappa[i], 1.0, 2)
            );
        }
        let _ = write!(s, "{:w$}", "total");
        for t in &self.col_totals {
            let _ = write!(s, " {t:>6}");
        }
        let _ = writeln!(s, " {:>7}\n", self.total);
        for (j, n) in self.names.iter().enumerate() {
            let _ = writeln!(s, "c{j} = {n}");
        }
        let _ = writeln!(s, "\nOverall Accuracy (OA): {:.2}%", self.overall_accuracy * 100.0);
        let _ = writeln!(s, "Overall Kappa (KAPPA): {}", fmt_opt(self.overall_kappa, 1.0, 3));
        let _ = writeln!(s, "Mean-Kappa: {}", fmt_opt(self.mean_kappa, 1.0, 2));
        let _ = writeln!(s, "Standard Deviation: {}", fmt_opt(self.kappa_sd, 1.0, 2));
        s
    }

    /// Machine-readable per-class statistics, one row per class.
    pub fn stats_csv(&self) -> String {
        let mut s = String::from("class,row_total,col_total,producer_accuracy,user_accuracy,conditional_kappa\n");
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.10}"));
        for i in 0..self.names.len() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                self.names[i],
                self.row_totals[i],
                self.col_totals[i],
                opt(self.producer_accuracy[i]),
                opt(self.user_accuracy[i]),
                opt(self.conditional_kappa[i])
            );
        }
        let _ = writeln!(s, "overall_accuracy,{:.10}", self.overall_accuracy);
        let _ = writeln!(s, "overall_kappa,{}", opt(self.overall_kappa));
        let _ = writeln!(s, "mean_kappa,{}", opt(self.mean_kappa));
        let _ = writeln!(s, "kappa_sd,{}", opt(self.kappa_sd));
        s
    }
}

/// Side-by-side summary of several systems assessed over the same
/// classes: per-class conditional kappa with its mean and deviation across
/// systems, then each system's Mean-Kappa, SD, OA and overall kappa.
pub fn render_summary(systems: &[(String, AssessmentReport)]) -> Result<String> {
    let Some((_, first)) = systems.first() else {
        return Err(Error::argument("no systems to summarize"));
    };
    let names = &first.names;
    if systems.iter().any(|(_, r)| &r.names != names) {
        return Err(Error::argument("systems were assessed over different classes"));
    }
    let w = names.iter().map(String::len).max().unwrap_or(0).max(16);
    let cw = systems.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(7);
    let mut s = format!("{:w$}", "class");
    for (n, _) in systems {
        let _ = write!(s, " {n:>cw$}");
    }
    let _ = writeln!(s, " {:>6} {:>6}", "mean", "sd");
    for (i, name) in names.iter().enumerate() {
        let _ = write!(s, "{name:w$}");
        let mut shown = Vec::with_capacity(systems.len());
        for (_, r) in systems {
            let k = r.conditional_kappa[i].map(|k| round_to(k, 2));
            shown.extend(k);
            let _ = write!(s, " {:>cw$}", fmt_opt(k, 1.0, 2));
        }
        let (mean, sd) = mean_and_sd(&shown);
        let _ = writeln!(s, " {:>6} {:>6}", fmt_opt(mean, 1.0, 2), fmt_opt(sd, 1.0, 2));
    }
    let rows: [(&str, fn(&AssessmentReport) -> String); 4] = [
        ("Mean-Kappa", |r| fmt_opt(r.mean_kappa, 1.0, 2)),
        ("SD", |r| fmt_opt(r.kappa_sd, 1.0, 2)),
        ("OA (%)", |r| format!("{:.2}", 100.0 * r.overall_accuracy)),
        ("Overall kappa", |r| fmt_opt(r.overall_kappa, 1.0, 2)),
    ];
    for (label, f) in rows {
        let _ = write!(s, "{label:w$}");
        for (_, r) in systems {
            let _ = write!(s, " {:>cw$}", f(r));
        }
        s.push('\n');
    }
    Ok(s)
}

/// Tallies predicted against true labels directly, one count per pair.
pub fn matrix_from_pairs(predicted: &[usize], truth: &[usize], names: Vec<String>) -> Result<ErrorMatrix> {
    if predicted.len() != truth.len() {
        return Err(Error::shape(format!(
            "{} predictions for {} reference labels",
            predicted.len(),
            truth.len()
        )));
    }
    let mut m = ErrorMatrix::zeros(names)?;
    for (&p, &t) in predicted.iter().zip(truth) {
        if p >= m.k || t >= m.k {
            return Err(Error::Index(format!("label {} outside {} classes", p.max(t), m.k)));
        }
        m.add(p, t);
    }
    Ok(m)
}

/// Sample sizes per classified-class stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedDesign {
    /// `sizes[i]` pixels are drawn from the pixels classified as `i`.
    pub sizes: Vec<usize>,
    pub min_per_stratum: usize,
    pub total_target: usize,
    pub seed: u64,
}

pub const DEFAULT_MIN_PER_STRATUM: usize = 50;

/// Pixels eligible for assessment, grouped by classified class: both maps
/// must carry a label there.
fn strata(classified: &LabelMap, reference: &LabelMap, k: usize) -> Result<Vec<Vec<usize>>> {
    if classified.width != reference.width || classified.height != reference.height {
        return Err(Error::shape(format!(
            "classified map {}x{} vs reference map {}x{}",
            classified.width, classified.height, reference.width, reference.height
        )));
    }
    let mut out = vec![Vec::new(); k];
    for (p, (&c, &r)) in classified.data.iter().zip(&reference.data).enumerate() {
        if c == crate::sampling::NO_DATA || r == crate::sampling::NO_DATA {
            continue;
        }
        if c as usize >= k || r as usize >= k {
            return Err(Error::format(format!("label {} at pixel {p} outside {k} classes", c.max(r))));
        }
        out[c as usize].push(p);
    }
    Ok(out)
}

impl StratifiedDesign {
    /// The same size for every stratum.
    pub fn uniform(k: usize, per_stratum: usize, seed: u64) -> Self {
        StratifiedDesign {
            sizes: vec![per_stratum; k],
            min_per_stratum: per_stratum,
            total_target: per_stratum * k,
            seed,
        }
    }

    /// Sizes proportional to each stratum's share of the classified area,
    /// raised to `min_per_stratum`.
    pub fn area_weighted(
        classified: &LabelMap,
        reference: &LabelMap,
        k: usize,
        total_target: usize,
        min_per_stratum: usize,
        seed: u64,
    ) -> Result<Self> {
        let pops: Vec<usize> = strata(classified, reference, k)?.iter().map(Vec::len).collect();
        let all: usize = pops.iter().sum();
        if all == 0 {
            return Err(Error::argument("no pixel is labeled in both maps"));
        }
        let sizes = pops
            .iter()
            .map(|&p| {
                if p == 0 {
                    0
                } else {
                    ((total_target as f64 * p as f64 / all as f64).round() as usize).max(min_per_stratum)
                }
            })
            .collect();
        Ok(StratifiedDesign {
            sizes,
            min_per_stratum,
            total_target,
            seed,
        })
    }
}

/// Draws each stratum's sample uniformly without replacement and tallies
/// classified against reference labels. A stratum smaller than its design
/// size is taken whole.
pub fn build_error_matrix(
    classified: &LabelMap,
    reference: &LabelMap,
    design: &StratifiedDesign,
    names: Vec<String>,
) -> Result<ErrorMatrix> {
    let k = names.len();
    if design.sizes.len() != k {
        return Err(Error::argument(format!(
            "design has {} strata for {k} classes",
            design.sizes.len()
        )));
    }
    let pools = strata(classified, reference, k)?;
    let mut m = ErrorMatrix::zeros(names)?;
    for (i, mut pool) in pools.into_iter().enumerate() {
        let want = design.sizes[i];
        if pool.len() < want {
            if !pool.is_empty() {
                warn!("stratum {i}: {} pixels available, {want} designed; taking all", pool.len());
            }
        } else {
            let mut rng = Rng::derive(design.seed, i as u64);
            // partial Fisher-Yates: the first `want` entries are the draw
            for a in 0..want {
                let b = a + rng.below(pool.len() - a);
                pool.swap(a, b);
            }
            pool.truncate(want);
        }
        for p in pool {
            m.add(i, reference.data[p] as usize);
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m2(a: u64, b: u64, c: u64, d: u64) -> ErrorMatrix {
        ErrorMatrix::from_rows(&[vec![a, b], vec![c, d]], vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn trivial_cases() {
        let m = m2(5, 0, 0, 5);
        assert_eq!(overall_accuracy(&m).unwrap(), 1.0);
        assert_eq!(overall_kappa(&m).unwrap(), 1.0);
        assert_eq!(producer_user_accuracy(&m, 1).unwrap(), (Some(1.0), Some(1.0)));
        assert!(matches!(overall_accuracy(&m2(0, 0, 0, 0)), Err(Error::Argument(_))));
        assert!(matches!(overall_kappa(&m2(4, 0, 0, 0)), Err(Error::UndefinedKappa(_))));
        assert!(matches!(producer_user_accuracy(&m, 2), Err(Error::Index(_))));
    }

    #[test]
    fn empty_row_is_absent_not_zero() {
        let m = m2(3, 2, 0, 0);
        let (pa, ua) = producer_user_accuracy(&m, 1).unwrap();
        assert_eq!(pa, Some(0.0));
        assert_eq!(ua, None);
        let r = full_report(&m).unwrap();
        assert_eq!(r.conditional_kappa[1], None);
    }

    #[test]
    fn kappa_by_hand() {
        // N=10, diag 7, rows (5,5), cols (6,4): (70-50)/(100-50)
        let m = m2(4, 1, 2, 3);
        assert!((overall_kappa(&m).unwrap() - 0.4).abs() < 1e-15);
        // class 0: (10*4 - 5*6)/(10*5 - 5*6) = 10/20
        assert!((conditional_kappa(&m, 0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let m = m2(4, 1, 2, 3);
        assert_eq!(ErrorMatrix::from_csv(&m.to_csv()).unwrap(), m);
        assert!(matches!(ErrorMatrix::from_csv("x,a,b\na,1,2\nb,3\n"), Err(Error::Format(_))));
        assert!(matches!(ErrorMatrix::from_csv("x,a,b\nb,1,2\na,3,4\n"), Err(Error::Format(_))));
        assert!(ErrorMatrix::zeros(vec!["a,b".into()]).is_err());
    }

    #[test]
    fn rounding_and_spread() {
        assert_eq!(round_to(0.96875, 2), 0.97);
        assert_eq!(round_to(97.2073, 2), 97.21);
        assert_eq!(mean_and_sd(&[]), (None, None));
        assert_eq!(mean_and_sd(&[2.0]), (Some(2.0), None));
        let (m, s) = mean_and_sd(&[1.0, 3.0]);
        assert_eq!(m, Some(2.0));
        assert!((s.unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    fn map(w: usize, h: usize, f: impl Fn(usize) -> u8) -> LabelMap {
        LabelMap::new(w, h, (0..w * h).map(f).collect()).unwrap()
    }

    #[test]
    fn identical_maps_give_a_diagonal_matrix() {
        let a = map(30, 30, |p| (p % 7 % 3) as u8);
        let m = build_error_matrix(&a, &a, &StratifiedDesign::uniform(3, 50, 1), vec!["x".into(), "y".into(), "z".into()])
            .unwrap();
        assert!(m.is_diagonal());
        assert_eq!(m.total(), 150);
    }

    #[test]
    fn small_strata_are_taken_whole() {
        let a = map(10, 10, |p| u8::from(p < 20));
        let m = build_error_matrix(&a, &a, &StratifiedDesign::uniform(2, 50, 1), vec!["x".into(), "y".into()]).unwrap();
        assert_eq!(m.row_totals(), vec![50, 20]);
    }

    #[test]
    fn known_confusion_rate_is_recovered() {
        // every tenth pixel of each classified class is wrong in the reference
        let classified = map(100, 100, |p| (p / 5000) as u8);
        let reference = map(100, 100, |p| {
            let c = (p / 5000) as u8;
            if p % 10 == 0 { 1 - c } else { c }
        });
        let names = vec!["x".to_string(), "y".to_string()];
        let m = build_error_matrix(&classified, &reference, &StratifiedDesign::uniform(2, 500, 7), names).unwrap();
        let off = (m.get(0, 1) + m.get(1, 0)) as f64 / m.total() as f64;
        assert!((off - 0.1).abs() < 0.03, "{off}");
        assert_eq!(m.total(), 1000);
    }

    #[test]
    fn area_weighting_floors_at_the_minimum() {
        let classified = map(100, 10, |p| if p < 900 { 0 } else { 1 });
        let d = StratifiedDesign::area_weighted(&classified, &classified, 2, 200, 50, 0).unwrap();
        assert_eq!(d.sizes, vec![180, 50]);
        let mut with_gap = classified.clone();
        with_gap.data[0] = crate::sampling::NO_DATA;
        assert!(StratifiedDesign::area_weighted(&with_gap, &map(10, 10, |_| 0), 2, 10, 5, 0).is_err());
    }
}
