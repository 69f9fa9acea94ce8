use nalgebra::{DMatrix, DVector};

/// Minimum-norm point of the convex hull of `points` (Wolfe's active-set
/// algorithm). Returns the point and its convex weights.
pub fn min_norm_point(points: &[DVector<f64>]) -> (DVector<f64>, Vec<f64>) {
    let m = points.len();
    assert!(m > 0, "at least one point is required");
    let dim = points[0].len();
    let scale = points.iter().map(|g| g.norm_squared()).fold(0.0, f64::max);
    if scale == 0.0 {
        let mut w = vec![0.0; m];
        w[0] = 1.0;
        return (DVector::zeros(dim), w);
    }
    let tol = 1e-12 * scale;

    let start = (0..m)
        .min_by(|&a, &b| points[a].norm_squared().total_cmp(&points[b].norm_squared()))
        .expect("nonempty");
    let mut active = vec![start];
    let mut lambda = vec![1.0];
    let mut x = points[start].clone();

    for _ in 0..(50 * m + 50) {
        let (j, gx) = (0..m)
            .map(|j| (j, points[j].dot(&x)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        if x.norm_squared() - gx <= tol || active.contains(&j) {
            break;
        }
        active.push(j);
        lambda.push(0.0);
        loop {
            let mu = affine_min_norm(points, &active);
            if mu.iter().all(|&v| v > 1e-14) {
                lambda = mu;
                break;
            }
            let mut theta = 1.0f64;
            for (l, v) in lambda.iter().zip(&mu) {
                if *v <= 1e-14 && l - v > 0.0 {
                    theta = theta.min(l / (l - v));
                }
            }
            for (l, v) in lambda.iter_mut().zip(&mu) {
                *l += theta * (v - *l);
            }
            let keep: Vec<bool> = lambda.iter().map(|&l| l > 1e-14).collect();
            active = active.iter().zip(&keep).filter(|(_, &k)| k).map(|(&i, _)| i).collect();
            lambda = lambda.iter().zip(&keep).filter(|(_, &k)| k).map(|(&l, _)| l).collect();
            let total: f64 = lambda.iter().sum();
            lambda.iter_mut().for_each(|l| *l /= total);
            if active.len() <= 1 {
                lambda = vec![1.0; active.len()];
                break;
            }
        }
        x = combine(points, &active, &lambda);
    }
    let mut weights = vec![0.0; m];
    for (&i, &l) in active.iter().zip(&lambda) {
        weights[i] = l;
    }
    (x, weights)
}

fn combine(points: &[DVector<f64>], idx: &[usize], w: &[f64]) -> DVector<f64> {
    let mut x = DVector::zeros(points[0].len());
    for (&i, &l) in idx.iter().zip(w) {
        x.axpy(l, &points[i], 1.0);
    }
    x
}

/// Weights `μ` (summing to one) minimizing `‖Σ μ_i g_i‖` over the affine hull.
fn affine_min_norm(points: &[DVector<f64>], idx: &[usize]) -> Vec<f64> {
    let k = idx.len();
    let mut kkt = DMatrix::zeros(k + 1, k + 1);
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            kkt[(a, b)] = points[i].dot(&points[j]);
        }
        kkt[(a, k)] = 1.0;
        kkt[(k, a)] = 1.0;
    }
    let mut rhs = DVector::zeros(k + 1);
    rhs[k] = 1.0;
    let sol = kkt
        .clone()
        .lu()
        .solve(&rhs)
        .filter(|s| s.iter().all(|v| v.is_finite()))
        .or_else(|| kkt.svd(true, true).solve(&rhs, 1e-14).ok())
        .unwrap_or_else(|| {
            let mut s = DVector::zeros(k + 1);
            s.rows_mut(0, k).fill(1.0 / k as f64);
            s
        });
    sol.rows(0, k).iter().copied().collect()
}
