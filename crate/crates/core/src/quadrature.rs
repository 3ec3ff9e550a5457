//! Adaptive composite Gauss–Legendre integration.
//!
//! Each panel is integrated with the same n-point rule over the whole panel
//! and over its two halves; the difference is the panel's error estimate.
//! The panel with the largest estimate is split until the summed estimate
//! meets the requested tolerance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Nodes and weights of an n-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the rule by Newton iteration on the Legendre polynomial.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// The shared 20-point rule used by the adaptive integrator.
    pub fn standard() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(20))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, f: &mut F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_panels: usize,
    pub initial_panels: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-11,
            rel: 0.0,
            max_panels: 4000,
            initial_panels: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
    pub panels: usize,
    pub evaluations: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<Integral> {
    let rule = GaussLegendre::standard();
    let per_panel = 3 * rule.len();
    let mut evaluations = 0;
    let make_panel = |a: f64, b: f64, f: &mut F| {
        let m = 0.5 * (a + b);
        let coarse = rule.integrate(f, a, b);
        let fine = rule.integrate(f, a, m) + rule.integrate(f, m, b);
        Panel {
            a,
            b,
            value: fine,
            error: (fine - coarse).abs(),
        }
    };

    let n0 = tol.initial_panels.max(1);
    let width = (b - a) / n0 as f64;
    let mut heap = BinaryHeap::with_capacity(2 * n0);
    for i in 0..n0 {
        let lo = a + width * i as f64;
        let hi = if i + 1 == n0 { b } else { lo + width };
        heap.push(make_panel(lo, hi, &mut f));
        evaluations += per_panel;
    }

    let mut error_total: f64 = heap.iter().map(|p| p.error).sum();
    loop {
        if error_total <= tol.abs || error_total <= tol.rel * running_value(&heap).abs() {
            // Final sum in position order so the result does not depend on heap layout.
            let mut panels: Vec<&Panel> = heap.iter().collect();
            panels.sort_by(|p, q| p.a.total_cmp(&q.a));
            return Ok(Integral {
                value: panels.iter().map(|p| p.value).sum(),
                error_estimate: panels.iter().map(|p| p.error).sum(),
                panels: heap.len(),
                evaluations,
            });
        }
        if heap.len() >= tol.max_panels || !error_total.is_finite() {
            return Err(Error::Quadrature { panels: heap.len() });
        }
        let worst = heap.pop().expect("heap is never empty");
        error_total -= worst.error;
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            // Cannot be split further in floating point; accept as is.
            heap.push(Panel { error: 0.0, ..worst });
            continue;
        }
        let left = make_panel(worst.a, m, &mut f);
        let right = make_panel(m, worst.b, &mut f);
        error_total += left.error + right.error;
        heap.push(left);
        heap.push(right);
        evaluations += 2 * per_panel;
        if error_total < 0.0 {
            error_total = heap.iter().map(|p| p.error).sum();
        }
    }
}

fn running_value(heap: &BinaryHeap<Panel>) -> f64 {
    heap.iter().map(|p| p.value).sum()
}
