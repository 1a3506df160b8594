//! Exact identities between the vertex-model engines and the contour-integral
//! machinery, at reduced sizes (the acceptance target runs the full grids).

use kpzlab::contour::{
    fredholm_det_nystrom, fredholm_det_series, fredholm_v, generating_series_check, kernel_d, kernel_v, kernel_v_matrix,
    place_contours_asep, place_contours_vertex, q_moment_integral, Contour, ContourKind, GFunction, QMomentParams, D_DEFAULT,
};
use kpzlab::params::{AsepParams, SixVertexParams};
use kpzlab::vertex_model::{exact_fredholm_lhs, exact_weighted_q_moment};
use kpzlab::{Cplx, Real};

fn d_contour(n: usize) -> Contour {
    let (r, d, delta, cut) = D_DEFAULT;
    Contour::new(ContourKind::DContour { r, d, delta, im_cutoff: cut }, n)
}

#[test]
fn nested_q_moment_equals_weighted_expectation() {
    let p = SixVertexParams::new(0.25, 0.5, 0.5, 0.04).unwrap();
    for (x, t) in [(2usize, 2usize), (3, 2)] {
        for k in 1..=2u32 {
            for j in 1..=2u32 {
                let lhs = exact_weighted_q_moment(&p, x, t, k, j).unwrap();
                let qp = QMomentParams::from_vertex(&p, j);
                let rhs = q_moment_integral(&qp, x as i32 - 1, t as i32, k as usize, 200).unwrap();
                assert!(rhs.im.abs() < 1e-10);
                assert!((lhs - rhs.re).abs() < 1e-8, "x={x} t={t} k={k} J={j}: {lhs} vs {rhs}");
            }
        }
    }
}

#[test]
fn six_vertex_determinant_equals_exact_observable() {
    let p = SixVertexParams::new(0.25, 0.5, 0.5, 0.3).unwrap();
    let circles = place_contours_vertex(&p).unwrap();
    for (x, t) in [(2i32, 3i32), (3, 3)] {
        let g = GFunction::six_vertex(&p, x, t);
        for pw in [1.0, 3.0] {
            let zeta = Cplx::new(-p.q.powf(pw), 0.0);
            let lhs = exact_fredholm_lhs(&p, x as usize, t as usize, zeta).unwrap();
            let rhs = fredholm_v(&g, pw, &circles, 128, 1e-10).unwrap();
            assert!((lhs - rhs.value).norm() < 1e-6, "x={x} t={t} p={pw}: {lhs} vs {}", rhs.value);
        }
    }
}

#[test]
fn determinant_is_invariant_under_contour_deformation() {
    let p = SixVertexParams::new(0.25, 0.5, 0.5, 0.3).unwrap();
    let circles = place_contours_vertex(&p).unwrap();
    let g = GFunction::six_vertex(&p, 2, 2);
    let a = fredholm_v(&g, 3.0, &circles, 128, 1e-10).unwrap().value;
    let b = fredholm_v(&g, 3.0, &circles.scaled(1.01), 128, 1e-10).unwrap().value;
    assert!((a - b).norm() < 1e-8, "{a} vs {b}");
}

#[test]
fn series_and_nystrom_agree_on_v_kernel() {
    let p = SixVertexParams::new(0.25, 0.5, 0.5, 0.3).unwrap();
    let circles = place_contours_vertex(&p).unwrap();
    let g = GFunction::six_vertex(&p, 2, 3);
    let (gamma, c) = circles.contours(256);
    let builder = |c: &Contour| kernel_v_matrix(&g, 3.0, &circles.contours(c.n).0, c);
    let ny = fredholm_det_nystrom(builder, &c.with_n(128), 1e-11, 1024).unwrap();
    // series on a different node set
    let (_, c_alt) = circles.contours(200);
    let km = kernel_v_matrix(&g, 3.0, &gamma.with_n(200), &c_alt);
    let se = fredholm_det_series(&km, 60, 1e-14).unwrap();
    assert!((ny.value - se.value).norm() < 1e-8, "{} vs {}", ny.value, se.value);
}

#[test]
fn asep_contours_exist_for_the_reference_point() {
    let p = AsepParams::new(0.25, 1.0, 0.6, 0.3).unwrap();
    let circles = place_contours_asep(&p).unwrap();
    let g = GFunction::asep(&p, 0, 1.0);
    let v = fredholm_v(&g, 1.0, &circles, 128, 1e-10).unwrap().value;
    assert!(v.re > 0.0 && v.re < 1.0 && v.im.abs() < 1e-8, "{v}");
}

#[test]
fn generating_series_identity_without_zeros_of_g() {
    // with β2 = 0 the function g has no zeros near C
    let p = SixVertexParams::new(0.25, 0.5, 0.6, 0.05).unwrap();
    let g = GFunction::SixVertex { q: p.q, kappa: p.kappa, beta1: p.beta1, beta2: 0.0, x: 3, t: 3 };
    let c = Contour::circle(Cplx::new(0.0, 0.0), 0.56, 128);
    for zeta in [Cplx::new(-0.05, 0.0), Cplx::new(-0.02, 0.03)] {
        let chk = generating_series_check(&g, &c, zeta, 12, &d_contour(20)).unwrap();
        assert!((chk.lhs - chk.rhs).norm() < 1e-7, "{zeta}: {} vs {}", chk.lhs, chk.rhs);
    }
}

#[test]
fn j_sum_kernel_matches_d_contour_kernel() {
    let p = SixVertexParams::new(0.25, 0.5, 0.6, 0.05).unwrap();
    let g = GFunction::six_vertex(&p, 3, 3);
    let gamma = Contour::circle(Cplx::new(0.0, 0.0), 0.45, 512);
    let d = d_contour(20);
    let pw: Real = 5.0;
    let zeta = Cplx::new(-p.q.powf(pw), 0.0);
    for (a, b) in [(0.3, 1.9), (2.2, -0.7), (-1.0, 0.4)] {
        let w = Cplx::from_polar(0.56, a);
        let wp = Cplx::from_polar(0.56, b);
        let kv = kernel_v(w, wp, &g, pw, &gamma);
        let kd = kernel_d(w, wp, &g, zeta, &d);
        assert!((kv - kd).norm() < 1e-8 * kv.norm().max(1.0), "{kv} vs {kd}");
    }
}
