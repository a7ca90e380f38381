//! Helpers shared by the integration tests.
#![allow(dead_code)]

/// Minimises `(h/2) Σ (u - f)² + λ Σ |Δu|` by enumerating sign patterns of
/// the differences. Within a pattern the objective is a smooth quadratic with
/// a closed-form minimiser; the best sign-consistent candidate is optimal.
pub fn brute_force_prox(f: &[f64], h: f64, lambda: f64) -> Vec<f64> {
    let n = f.len();
    let objective = |u: &[f64]| {
        let fit: f64 = u.iter().zip(f).map(|(a, b)| (a - b).powi(2)).sum::<f64>() * h / 2.0;
        let tv: f64 = u.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        fit + lambda * tv
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for code in 0..3usize.pow((n - 1) as u32) {
        let signs: Vec<i32> = (0..n - 1)
            .map(|j| (code / 3usize.pow(j as u32) % 3) as i32 - 1)
            .collect();
        // groups of cells glued together by zero differences
        let mut groups: Vec<Vec<usize>> = vec![vec![0]];
        for (j, &sign) in signs.iter().enumerate() {
            if sign == 0 {
                groups.last_mut().unwrap().push(j + 1);
            } else {
                groups.push(vec![j + 1]);
            }
        }
        let boundaries: Vec<i32> = signs.iter().copied().filter(|&s| s != 0).collect();
        let mut u = vec![0.0; n];
        let mut values = Vec::new();
        for (k, g) in groups.iter().enumerate() {
            let mean = g.iter().map(|&i| f[i]).sum::<f64>() / g.len() as f64;
            let left = if k > 0 { boundaries[k - 1] as f64 } else { 0.0 };
            let right = if k < boundaries.len() { boundaries[k] as f64 } else { 0.0 };
            // d/dv of λ (left (v - prev) + right (next - v)) is λ (left - right)
            let v = mean - lambda * (left - right) / (h * g.len() as f64);
            values.push(v);
            for &i in g {
                u[i] = v;
            }
        }
        let consistent = values
            .windows(2)
            .zip(&boundaries)
            .all(|(w, &s)| (w[1] - w[0]) * s as f64 > 0.0);
        if !consistent {
            continue;
        }
        let value = objective(&u);
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, u));
        }
    }
    best.unwrap().1
}

