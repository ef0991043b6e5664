//! Values printed with the worked examples: the eight hand-picked detunings,
//! the diagonal kernel and spectrum (units 1e-2), the recovered distribution,
//! and the general example's kernel columns and spectrum (units 1e-1).

pub const POINTS: [f64; 8] = [
    -0.238903, -4.15271, -2.18112, 4.7646, -4.45749, -3.34587, 4.92128, -0.361181,
];

#[rustfmt::skip]
pub const K_PRINTED: [[f64; 8]; 8] = [
    [1.47341, 1.00608, 1.11404, 0.68844, 1.09823, 0.88438, 0.68566, 0.85648],
    [3.65773, 4.03497, 2.57462, 2.59686, 1.30956, 2.41597, 3.19158, 2.85843],
    [3.41250, 1.63790, 1.47325, 1.71805, 1.63361, 1.60156, 1.29623, 1.45646],
    [0.06990, 0.07098, 0.40837, 1.06732, 1.02115, 0.63968, 0.65275, 0.74980],
    [0.89358, 0.83841, 0.42001, 0.63426, 0.46637, 0.64601, 0.76208, 0.63524],
    [1.26672, 0.81926, 0.54281, 0.61829, 0.87052, 0.58272, 0.45410, 0.68421],
    [0.09186, 0.85753, 3.79587, 6.18143, 4.41536, 3.26403, 4.17912, 4.42602],
    [0.71383, 0.72236, 0.57617, 0.36789, 0.74751, 0.44229, 0.36831, 0.56118],
];

pub const Q_PRINTED: [f64; 8] = [
    1.23094, 3.44540, 2.50507, 0.22298, 0.78367, 0.99037, 1.37427, 0.66994,
];

pub const P_PRINTED: [f64; 8] = [
    0.50106, 0.24944, 0.12506, 0.06358, 0.03105, 0.01592, 0.00566, 0.00766,
];

// columns 1, 2, 3, 5, 6, 9 of the printed general kernel (units 1e-1)
#[rustfmt::skip]
pub const M_PRINTED: [[(f64, f64); 6]; 9] = [
    [(2.65078, 0.0), (0.72701, 0.06619), (0.31389, 0.04904), (2.73543, 0.0), (0.92622, 0.09507), (3.47639, 0.0)],
    [(2.68039, 0.0), (0.78019, 0.06690), (0.50595, 0.05111), (3.01083, 0.0), (1.1303, 0.10038), (2.86101, 0.0)],
    [(2.79261, 0.0), (0.84290, 0.06965), (0.53053, 0.05412), (3.12871, 0.0), (1.48178, 0.10416), (3.40431, 0.0)],
    [(2.98886, 0.0), (1.00804, 0.07440), (0.57164, 0.02008), (3.30036, 0.0), (1.37987, 0.02789), (3.50278, 0.0)],
    [(3.26298, 0.0), (1.15702, 0.05181), (0.57538, -0.10663), (3.49535, 0.0), (1.26968, -0.08778), (2.89283, 0.0)],
    [(3.59519, 0.0), (1.17639, -0.02772), (0.24166, -0.25788), (3.33098, 0.0), (0.76202, -0.12633), (2.43629, 0.0)],
    [(3.86136, 0.0), (0.87698, -0.13806), (-0.43399, -0.29357), (2.78533, 0.0), (-0.16378, -0.10401), (1.68726, 0.0)],
    [(3.85851, 0.0), (0.08117, -0.21613), (-1.30234, -0.18395), (1.95965, 0.0), (-0.72898, -0.11875), (1.76493, 0.0)],
    [(3.38095, 0.0), (-1.0129, -0.22813), (-1.67703, -0.02836), (1.51133, 0.0), (-0.61621, -0.17913), (2.29425, 0.0)],
];
pub const M_COLUMNS: [usize; 6] = [0, 1, 2, 4, 5, 8];

pub const S_PRINTED: [f64; 9] = [
    2.85246, 2.62496, 2.87073, 2.9511, 2.80948, 2.85702, 2.90594, 3.17267, 3.24202,
];
