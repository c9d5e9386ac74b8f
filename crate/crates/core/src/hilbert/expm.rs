//! Matrix exponential via scaling-and-squaring with a degree-13 Padé
//! approximant (Higham 2005). Lower degrees are used when the 1-norm is small
//! enough that they already reach double precision.

use nalgebra::DMatrix;
use num_complex::Complex64;

type CMat = DMatrix<Complex64>;

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539398330063230e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

pub fn one_norm(a: &CMat) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn scaled_identity(n: usize, c: f64) -> CMat {
    CMat::from_diagonal_element(n, n, Complex64::new(c, 0.0))
}

fn solve_pade(u: CMat, v: CMat) -> CMat {
    // (V - U)^{-1} (V + U)
    let p = &v + &u;
    let q = v - u;
    q.lu().solve(&p).expect("Padé denominator is singular")
}

fn pade_low(a: &CMat, b: &[f64]) -> CMat {
    let n = a.nrows();
    let a2 = a * a;
    let m = b.len() - 1;
    // U = A * sum_{odd} b_k A^{k-1}, V = sum_{even} b_k A^k
    let mut u_inner = scaled_identity(n, b[1]);
    let mut v = scaled_identity(n, b[0]);
    let mut power = CMat::identity(n, n);
    let mut k = 2;
    while k <= m {
        power = &power * &a2;
        v += &power * Complex64::new(b[k], 0.0);
        if k + 1 <= m {
            u_inner += &power * Complex64::new(b[k + 1], 0.0);
        }
        k += 2;
    }
    let u = a * u_inner;
    solve_pade(u, v)
}

fn pade13(a: &CMat) -> CMat {
    let n = a.nrows();
    let c = |x: f64| Complex64::new(x, 0.0);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let ident = CMat::identity(n, n);

    let u_hi = &a6 * c(B13[13]) + &a4 * c(B13[11]) + &a2 * c(B13[9]);
    let u_inner =
        &a6 * u_hi + &a6 * c(B13[7]) + &a4 * c(B13[5]) + &a2 * c(B13[3]) + &ident * c(B13[1]);
    let u = a * u_inner;

    let v_hi = &a6 * c(B13[12]) + &a4 * c(B13[10]) + &a2 * c(B13[8]);
    let v = &a6 * v_hi + &a6 * c(B13[6]) + &a4 * c(B13[4]) + &a2 * c(B13[2]) + &ident * c(B13[0]);
    solve_pade(u, v)
}

/// exp(A) for a square complex matrix.
pub fn expm(a: &CMat) -> CMat {
    assert_eq!(a.nrows(), a.ncols(), "expm requires a square matrix");
    let n = a.nrows();
    if n == 0 {
        return CMat::zeros(0, 0);
    }
    let norm = one_norm(a);
    if norm == 0.0 {
        return CMat::identity(n, n);
    }
    if norm <= THETA_3 {
        return pade_low(a, &B3);
    }
    if norm <= THETA_5 {
        return pade_low(a, &B5);
    }
    if norm <= THETA_7 {
        return pade_low(a, &B7);
    }
    if norm <= THETA_9 {
        return pade_low(a, &B9);
    }
    let s = if norm > THETA_13 { (norm / THETA_13).log2().ceil().max(0.0) as i32 } else { 0 };
    let scaled = a * Complex64::new(0.5f64.powi(s), 0.0);
    let mut r = pade13(&scaled);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}
