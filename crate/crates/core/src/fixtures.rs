//! Reference values computed independently of this crate and frozen here.

/// `Ψ(2)`, standard normal upper tail.
pub const NORMAL_TAIL_2: f64 = 0.022_750_131_948_179_21;
/// `Ψ(3)`.
pub const NORMAL_TAIL_3: f64 = 0.001_349_898_031_630_094_5;
/// `2Ψ(2) = P(sup_{[0,1]} B > 2)`.
pub const BM_SUP_TAIL_2: f64 = 0.045_500_263_896_358_41;
/// `2Ψ(4)`.
pub const BM_SUP_TAIL_4: f64 = 6.334_248_366_623_984e-5;
/// `2Ψ(2.5)`.
pub const BM_SUP_TAIL_2_5: f64 = 0.012_419_330_651_552_271;
/// `2Ψ(1)`.
pub const BM_SUP_TAIL_1: f64 = 0.317_310_507_862_914_1;
/// Iterated-Brownian prefactor at `T = 1`.
pub const ITERATED_BM_C: f64 = 0.820_800_786_370_665_5;
/// Iterated-Brownian rate `3·2^{-5/3}`.
pub const ITERATED_BM_BETA: f64 = 0.944_940_787_421_154_9;
/// `1 - E e^{-R}` for the range `R` of Brownian motion on `[0,1]`, from the
/// exact range density.
pub const BM_RANGE_LAPLACE_COMPLEMENT: f64 = 0.776_351_631_280_063_6;
/// `E R = 2√(2/π)`.
pub const BM_RANGE_MEAN: f64 = 1.595_769_121_605_730_7;
/// `1 - E exp(-exp(-1/2 + N))`.
pub const STRONG_DEPENDENCE_HALF: f64 = 0.487_571_354_375_912_88;
/// `P(N N' > 1)` for independent standard normals: the limit `L(2, 2)`,
/// where both processes are random lines.
pub const LIMIT_L_LINES: f64 = 0.104_496_831_502_326_18;
