//! Per-query latency and token records with their aggregates.

use std::fmt::{self, Write as _};
use std::time::Duration;

use crate::retrieval::RetrievedResult;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRecord {
    pub index: usize,
    pub query: String,
    pub extraction_ms: f64,
    pub search_ms: f64,
    pub reconstruction_ms: f64,
    pub total_ms: f64,
    pub tokens: usize,
    pub entries: usize,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

impl BenchRecord {
    pub fn from_result(index: usize, query: &str, r: &RetrievedResult) -> Self {
        Self {
            index,
            query: query.to_owned(),
            extraction_ms: ms(r.timing.extraction),
            search_ms: ms(r.timing.search),
            reconstruction_ms: ms(r.timing.reconstruction),
            total_ms: ms(r.timing.total),
            tokens: r.tokens_consumed,
            entries: r.entries.len(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
}

impl Summary {
    /// Mean, median and nearest-rank 95th percentile; zeros when empty.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        };
        let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
        Self {
            mean: v.iter().sum::<f64>() / n as f64,
            median,
            p95: v[rank - 1],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchReport {
    /// Ordered by query index.
    pub records: Vec<BenchRecord>,
}

impl BenchReport {
    pub fn new(mut records: Vec<BenchRecord>) -> Self {
        records.sort_by_key(|r| r.index);
        Self { records }
    }

    fn column(&self, f: impl Fn(&BenchRecord) -> f64) -> Summary {
        Summary::of(&self.records.iter().map(f).collect::<Vec<_>>())
    }

    pub fn extraction(&self) -> Summary {
        self.column(|r| r.extraction_ms)
    }

    pub fn search(&self) -> Summary {
        self.column(|r| r.search_ms)
    }

    pub fn reconstruction(&self) -> Summary {
        self.column(|r| r.reconstruction_ms)
    }

    pub fn total(&self) -> Summary {
        self.column(|r| r.total_ms)
    }

    pub fn tokens(&self) -> Summary {
        self.column(|r| r.tokens as f64)
    }

    /// Tab-separated, one header line then one line per query.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from(
            "index\textraction_ms\tsearch_ms\treconstruction_ms\ttotal_ms\ttokens\tentries\tquery\n",
        );
        for r in &self.records {
            let query = r.query.replace(['\t', '\n'], " ");
            let _ = writeln!(
                s,
                "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}\t{}",
                r.index,
                r.extraction_ms,
                r.search_ms,
                r.reconstruction_ms,
                r.total_ms,
                r.tokens,
                r.entries,
                query
            );
        }
        s
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "queries              {}", self.records.len())?;
        writeln!(f, "{:<20} {:>10} {:>10} {:>10}", "", "mean", "median", "p95")?;
        for (name, s) in [
            ("extraction ms", self.extraction()),
            ("search ms", self.search()),
            ("reconstruction ms", self.reconstruction()),
            ("total ms", self.total()),
            ("tokens", self.tokens()),
        ] {
            writeln!(f, "{name:<20} {:>10.3} {:>10.3} {:>10.3}", s.mean, s.median, s.p95)?;
        }
        writeln!(f, "avg token consumption {:.1}", self.tokens().mean)?;
        writeln!(f, "avg total ms          {:.3}", self.total().mean)?;
        write!(f, "avg search ms         {:.3}", self.search().mean)
    }
}
