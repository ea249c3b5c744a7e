//! Benchmark and verification drivers behind the CLI.
//!
//! Timing protocol: one warm-up pass, then the median of the requested
//! repetitions. Each microbenchmark repetition spins an inner loop sized so
//! one repetition takes a measurable slice of time. Throughput is derived
//! from a fixed flop accounting of 9 flop per modular multiplication and 2
//! per modular addition. Cycles are derived from the measured TSC rate;
//! they are reported for comparability, with the rate itself in the record
//! so downstream analysis can renormalize.
//!
//! Everything here reuses the same kernels the tests verify; timing never
//! influences computed values.

use crate::eval::{
    eval_blocked, eval_blocked_noalloc, eval_scalar, eval_scalar_fp, eval_simd, BivariateImage,
    EvalPlan, MonomialEvals,
};
use crate::field::PrimeModulus;
use crate::oracle::naive_evaluate;
use crate::poly::{EvalPoint, SparsePolynomial};
use crate::simd::{AlignedBuf, Backend, BackendKind, Portable, VOps};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;
use std::time::{Duration, Instant};

#[cfg(target_arch = "x86_64")]
use crate::simd::{V4, V8};

/// Flop cost of one modular multiplication (Algorithm steps: two FMAs, two
/// products, one floor, one add, two compare-selects plus the correction).
pub const FLOPS_MULMOD: f64 = 9.0;
/// Flop cost of one modular addition.
pub const FLOPS_ADDMOD: f64 = 2.0;
/// Flop cost of one term-evaluation in the polynomial kernel (one mulmod
/// plus one addmod).
pub const FLOPS_TERM_EVAL: f64 = FLOPS_MULMOD + FLOPS_ADDMOD;

pub const MICROBENCH_CSV_HEADER: &str =
    "op,impl,backend,lanes,len,reps,ns_per_op,cycles_per_op,gflops,freq_mhz";
pub const EVAL_CSV_HEADER: &str =
    "op,impl,backend,s,n,d,t,p,ti,td,m,ms_total,ns_per_term_eval,cycles_per_term_eval,gflops,freq_mhz,host";
pub const TUNE_CSV_HEADER: &str = "ti,td,m,ms_total,ns_per_term_eval,gflops";

/// Pins the process to the first core of its allowed set. Best effort;
/// returns whether pinning took effect.
pub fn pin_to_one_core() -> bool {
    #[cfg(target_os = "linux")]
    unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        if libc::sched_getaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &mut set) != 0 {
            return false;
        }
        let mut chosen = None;
        for cpu in 0..libc::CPU_SETSIZE as usize {
            if libc::CPU_ISSET(cpu, &set) {
                chosen = Some(cpu);
                break;
            }
        }
        let Some(cpu) = chosen else { return false };
        let mut one: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_ZERO(&mut one);
        libc::CPU_SET(cpu, &mut one);
        libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &one) == 0
    }
    #[cfg(not(target_os = "linux"))]
    {
        false
    }
}

/// Estimates the invariant-TSC rate in MHz by comparing the counter against
/// the monotonic clock over a short sleep. `None` off x86-64.
pub fn estimate_tsc_mhz() -> Option<f64> {
    #[cfg(target_arch = "x86_64")]
    {
        use std::arch::x86_64::_rdtsc;
        let t0 = Instant::now();
        let c0 = unsafe { _rdtsc() };
        std::thread::sleep(Duration::from_millis(40));
        let c1 = unsafe { _rdtsc() };
        let secs = t0.elapsed().as_secs_f64();
        Some((c1.wrapping_sub(c0)) as f64 / secs / 1e6)
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        None
    }
}

pub fn hostname() -> String {
    #[cfg(unix)]
    unsafe {
        let mut buf = [0u8; 256];
        if libc::gethostname(buf.as_mut_ptr() as *mut libc::c_char, buf.len()) == 0 {
            let end = buf.iter().position(|&b| b == 0).unwrap_or(buf.len());
            return String::from_utf8_lossy(&buf[..end]).into_owned();
        }
    }
    "unknown".into()
}

fn median_of<F: FnMut() -> Duration>(reps: usize, mut run: F) -> Duration {
    let reps = reps.max(1);
    let mut times: Vec<Duration> = (0..reps).map(|_| run()).collect();
    times.sort();
    times[reps / 2]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MicrobenchOp {
    Mul,
    Add,
}

impl MicrobenchOp {
    pub fn name(&self) -> &'static str {
        match self {
            MicrobenchOp::Mul => "mulmod",
            MicrobenchOp::Add => "addmod",
        }
    }

    fn flops(&self) -> f64 {
        match self {
            MicrobenchOp::Mul => FLOPS_MULMOD,
            MicrobenchOp::Add => FLOPS_ADDMOD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MicrobenchImpl {
    /// Scalar 128-bit-product baseline with precomputed reciprocal.
    IntScalar,
    /// Scalar floating-point kernel, conversions excluded.
    FpScalar,
    /// Scalar floating-point kernel with per-element conversions to and
    /// from the integer carrier inside the timed region.
    FpScalarConv,
    /// Vector kernel over the floating-point carrier, conversions excluded.
    Vector,
    /// Vector kernel with batch conversions inside the timed region.
    VectorConv,
}

impl MicrobenchImpl {
    pub const ALL: [MicrobenchImpl; 5] = [
        MicrobenchImpl::IntScalar,
        MicrobenchImpl::FpScalar,
        MicrobenchImpl::FpScalarConv,
        MicrobenchImpl::Vector,
        MicrobenchImpl::VectorConv,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MicrobenchImpl::IntScalar => "int-scalar",
            MicrobenchImpl::FpScalar => "fp-scalar",
            MicrobenchImpl::FpScalarConv => "fp-scalar-conv",
            MicrobenchImpl::Vector => "vector",
            MicrobenchImpl::VectorConv => "vector-conv",
        }
    }

    pub fn is_vector(&self) -> bool {
        matches!(self, MicrobenchImpl::Vector | MicrobenchImpl::VectorConv)
    }
}

impl std::str::FromStr for MicrobenchImpl {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "int-scalar" => Ok(MicrobenchImpl::IntScalar),
            "fp-scalar" => Ok(MicrobenchImpl::FpScalar),
            "fp-scalar-conv" => Ok(MicrobenchImpl::FpScalarConv),
            "vector" => Ok(MicrobenchImpl::Vector),
            "vector-conv" => Ok(MicrobenchImpl::VectorConv),
            other => Err(format!("unknown implementation {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicrobenchRecord {
    pub op: String,
    pub implementation: String,
    pub backend: String,
    pub lanes: usize,
    pub len: usize,
    pub reps: usize,
    pub ns_per_op: f64,
    pub cycles_per_op: f64,
    pub gflops: f64,
    pub freq_mhz: f64,
}

impl MicrobenchRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.4},{:.4},{:.4},{:.1}",
            self.op,
            self.implementation,
            self.backend,
            self.lanes,
            self.len,
            self.reps,
            self.ns_per_op,
            self.cycles_per_op,
            self.gflops,
            self.freq_mhz
        )
    }
}

#[derive(Debug, Clone)]
pub struct MicrobenchOptions {
    pub op: MicrobenchOp,
    pub impls: Vec<MicrobenchImpl>,
    pub len: usize,
    pub reps: usize,
    pub backend: Backend,
    pub p: u64,
}

impl MicrobenchOptions {
    pub fn new(op: MicrobenchOp, backend: Backend) -> Self {
        MicrobenchOptions {
            op,
            impls: MicrobenchImpl::ALL.to_vec(),
            len: 2048,
            reps: 5,
            backend,
            p: 1125899906842597, // largest 50-bit prime
        }
    }
}

/// Element-wise operation microbenchmark over vectors of `len` elements.
pub fn run_microbench(opts: &MicrobenchOptions) -> Vec<MicrobenchRecord> {
    let m = PrimeModulus::new(opts.p).expect("microbench modulus must be a valid prime");
    let len = opts.len;
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d6f64);
    let xs: Vec<u64> = (0..len).map(|_| rng.gen_range(0..m.p())).collect();
    let ys: Vec<u64> = (0..len).map(|_| rng.gen_range(0..m.p())).collect();
    let mut out_int = vec![0u64; len];
    let xf = AlignedBuf::from_u64s(&xs);
    let yf = AlignedBuf::from_u64s(&ys);
    let mut out_fp = AlignedBuf::zeroed(len);
    let mut conv_x = AlignedBuf::zeroed(len);
    let mut conv_y = AlignedBuf::zeroed(len);

    let freq_mhz = estimate_tsc_mhz().unwrap_or(f64::NAN);
    let mut records = Vec::new();

    for &implementation in &opts.impls {
        let backend = opts.backend;
        let (xf, yf) = (xf.as_slice(), yf.as_slice());
        let mut out_fp = out_fp.as_mut_slice();
        let conv_x = conv_x.as_mut_slice();
        let conv_y = conv_y.as_mut_slice();
        let mut pass: Box<dyn FnMut() + '_> = match (opts.op, implementation) {
            (MicrobenchOp::Mul, MicrobenchImpl::IntScalar) => Box::new(|| {
                for i in 0..len {
                    out_int[i] = m.mulmod_int(xs[i], ys[i]);
                }
                black_box(&mut out_int);
            }),
            (MicrobenchOp::Add, MicrobenchImpl::IntScalar) => Box::new(|| {
                for i in 0..len {
                    out_int[i] = m.addmod_int(xs[i], ys[i]);
                }
                black_box(&mut out_int);
            }),
            (MicrobenchOp::Mul, MicrobenchImpl::FpScalar) => Box::new(|| {
                scalar_fp_mul_pass(&m, &xf, &yf, &mut out_fp);
                black_box(&mut out_fp);
            }),
            (MicrobenchOp::Add, MicrobenchImpl::FpScalar) => Box::new(|| {
                for i in 0..len {
                    out_fp[i] = m.addmod_fp(xf[i], yf[i]);
                }
                black_box(&mut out_fp);
            }),
            (MicrobenchOp::Mul, MicrobenchImpl::FpScalarConv) => Box::new(|| {
                scalar_fp_mul_conv_pass(&m, &xs, &ys, &mut out_int);
                black_box(&mut out_int);
            }),
            (MicrobenchOp::Add, MicrobenchImpl::FpScalarConv) => Box::new(|| {
                for i in 0..len {
                    out_int[i] = m.addmod_fp(xs[i] as f64, ys[i] as f64) as u64;
                }
                black_box(&mut out_int);
            }),
            (MicrobenchOp::Mul, MicrobenchImpl::Vector) => Box::new(|| {
                varray_mul(backend, &m, &xf, &yf, &mut out_fp);
                black_box(&mut out_fp);
            }),
            (MicrobenchOp::Add, MicrobenchImpl::Vector) => Box::new(|| {
                varray_add(backend, &m, &xf, &yf, &mut out_fp);
                black_box(&mut out_fp);
            }),
            (MicrobenchOp::Mul, MicrobenchImpl::VectorConv) => Box::new(|| {
                for i in 0..len {
                    conv_x[i] = xs[i] as f64;
                    conv_y[i] = ys[i] as f64;
                }
                varray_mul(backend, &m, &conv_x, &conv_y, &mut out_fp);
                for i in 0..len {
                    out_int[i] = out_fp[i] as u64;
                }
                black_box(&mut out_int);
            }),
            (MicrobenchOp::Add, MicrobenchImpl::VectorConv) => Box::new(|| {
                for i in 0..len {
                    conv_x[i] = xs[i] as f64;
                    conv_y[i] = ys[i] as f64;
                }
                varray_add(backend, &m, &conv_x, &conv_y, &mut out_fp);
                for i in 0..len {
                    out_int[i] = out_fp[i] as u64;
                }
                black_box(&mut out_int);
            }),
        };

        // Size the inner loop to make one repetition measurable.
        let mut inner = 1u64;
        loop {
            let t = Instant::now();
            for _ in 0..inner {
                pass();
            }
            if t.elapsed() >= Duration::from_millis(8) || inner >= 1 << 22 {
                break;
            }
            inner *= 2;
        }

        pass(); // warm-up
        let reps = opts.reps.max(1);
        let med = median_of(reps, || {
            let t = Instant::now();
            for _ in 0..inner {
                pass();
            }
            t.elapsed()
        });
        drop(pass);

        let ops = (inner as f64) * (len as f64);
        let ns_per_op = med.as_secs_f64() * 1e9 / ops;
        let cycles_per_op = ns_per_op * freq_mhz / 1e3;
        let gflops = opts.op.flops() / ns_per_op;
        records.push(MicrobenchRecord {
            op: opts.op.name().into(),
            implementation: implementation.name().into(),
            backend: if implementation.is_vector() {
                opts.backend.name().into()
            } else {
                "-".into()
            },
            lanes: if implementation.is_vector() {
                opts.backend.lanes()
            } else {
                1
            },
            len,
            reps,
            ns_per_op,
            cycles_per_op,
            gflops,
            freq_mhz,
        });
    }
    records
}

#[inline(always)]
fn scalar_fp_mul_body(m: &PrimeModulus, x: &[f64], y: &[f64], out: &mut [f64]) {
    for i in 0..x.len() {
        out[i] = m.mulmod_fp(x[i], y[i]);
    }
}

#[inline(always)]
fn scalar_fp_mul_conv_body(m: &PrimeModulus, x: &[u64], y: &[u64], out: &mut [u64]) {
    for i in 0..x.len() {
        out[i] = m.mulmod_fp(x[i] as f64, y[i] as f64) as u64;
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "fma")]
unsafe fn scalar_fp_mul_body_fma(m: &PrimeModulus, x: &[f64], y: &[f64], out: &mut [f64]) {
    scalar_fp_mul_body(m, x, y, out)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "fma")]
unsafe fn scalar_fp_mul_conv_body_fma(m: &PrimeModulus, x: &[u64], y: &[u64], out: &mut [u64]) {
    scalar_fp_mul_conv_body(m, x, y, out)
}

/// Scalar FP multiplication pass, routed through an FMA-enabled shell when
/// the CPU has one so the fused operation is inlined rather than a libm
/// call. Values are identical either way.
fn scalar_fp_mul_pass(m: &PrimeModulus, x: &[f64], y: &[f64], out: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("fma") {
        unsafe { scalar_fp_mul_body_fma(m, x, y, out) };
        return;
    }
    scalar_fp_mul_body(m, x, y, out);
}

fn scalar_fp_mul_conv_pass(m: &PrimeModulus, x: &[u64], y: &[u64], out: &mut [u64]) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("fma") {
        unsafe { scalar_fp_mul_conv_body_fma(m, x, y, out) };
        return;
    }
    scalar_fp_mul_conv_body(m, x, y, out);
}

#[inline(always)]
unsafe fn varray_mul_impl<B: VOps>(m: &PrimeModulus, x: &[f64], y: &[f64], out: &mut [f64]) {
    let v = B::LANES;
    let p = B::splat(m.p_fp());
    let u = B::splat(m.u_fp());
    let n = x.len();
    let main = n / v * v;
    let (xp, yp, op) = (x.as_ptr(), y.as_ptr(), out.as_mut_ptr());
    let mut j = 0;
    while j < main {
        B::storea(op.add(j), B::mulmod(B::loada(xp.add(j)), B::loada(yp.add(j)), p, u));
        j += v;
    }
    if n > main {
        let k = n - main;
        let r = B::mulmod(B::load_first(xp.add(main), k), B::load_first(yp.add(main), k), p, u);
        B::store_first(op.add(main), r, k);
    }
}

#[inline(always)]
unsafe fn varray_add_impl<B: VOps>(m: &PrimeModulus, x: &[f64], y: &[f64], out: &mut [f64]) {
    let v = B::LANES;
    let p = B::splat(m.p_fp());
    let n = x.len();
    let main = n / v * v;
    let (xp, yp, op) = (x.as_ptr(), y.as_ptr(), out.as_mut_ptr());
    let mut j = 0;
    while j < main {
        B::storea(op.add(j), B::addmod(B::loada(xp.add(j)), B::loada(yp.add(j)), p));
        j += v;
    }
    if n > main {
        let k = n - main;
        let r = B::addmod(B::load_first(xp.add(main), k), B::load_first(yp.add(main), k), p);
        B::store_first(op.add(main), r, k);
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn varray_mul_v4(m: &PrimeModulus, x: &[f64], y: &[f64], out: &mut [f64]) {
    varray_mul_impl::<V4>(m, x, y, out)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn varray_mul_v8(m: &PrimeModulus, x: &[f64], y: &[f64], out: &mut [f64]) {
    varray_mul_impl::<V8>(m, x, y, out)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn varray_add_v4(m: &PrimeModulus, x: &[f64], y: &[f64], out: &mut [f64]) {
    varray_add_impl::<V4>(m, x, y, out)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn varray_add_v8(m: &PrimeModulus, x: &[f64], y: &[f64], out: &mut [f64]) {
    varray_add_impl::<V8>(m, x, y, out)
}

/// Lane-parallel `out[i] = x[i] * y[i] mod p` over whole arrays.
pub fn varray_mul(backend: Backend, m: &PrimeModulus, x: &[f64], y: &[f64], out: &mut [f64]) {
    assert!(x.len() == y.len() && x.len() == out.len());
    match backend.kind() {
        BackendKind::Portable => unsafe { varray_mul_impl::<Portable>(m, x, y, out) },
        #[cfg(target_arch = "x86_64")]
        BackendKind::V4 => unsafe { varray_mul_v4(m, x, y, out) },
        #[cfg(target_arch = "x86_64")]
        BackendKind::V8 => unsafe { varray_mul_v8(m, x, y, out) },
        #[cfg(not(target_arch = "x86_64"))]
        _ => unreachable!("hardware backends cannot be selected on this arch"),
    }
}

/// Lane-parallel `out[i] = x[i] + y[i] mod p` over whole arrays.
pub fn varray_add(backend: Backend, m: &PrimeModulus, x: &[f64], y: &[f64], out: &mut [f64]) {
    assert!(x.len() == y.len() && x.len() == out.len());
    match backend.kind() {
        BackendKind::Portable => unsafe { varray_add_impl::<Portable>(m, x, y, out) },
        #[cfg(target_arch = "x86_64")]
        BackendKind::V4 => unsafe { varray_add_v4(m, x, y, out) },
        #[cfg(target_arch = "x86_64")]
        BackendKind::V8 => unsafe { varray_add_v8(m, x, y, out) },
        #[cfg(not(target_arch = "x86_64"))]
        _ => unreachable!("hardware backends cannot be selected on this arch"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalImpl {
    IntScalar,
    FpScalar,
    Vector,
    Blocked,
    BlockedNoAlloc,
}

impl EvalImpl {
    pub fn name(&self) -> &'static str {
        match self {
            EvalImpl::IntScalar => "int-scalar",
            EvalImpl::FpScalar => "fp-scalar",
            EvalImpl::Vector => "vector",
            EvalImpl::Blocked => "blocked",
            EvalImpl::BlockedNoAlloc => "blocked-noalloc",
        }
    }
}

impl std::str::FromStr for EvalImpl {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "int-scalar" => Ok(EvalImpl::IntScalar),
            "fp-scalar" => Ok(EvalImpl::FpScalar),
            "vector" => Ok(EvalImpl::Vector),
            "blocked" => Ok(EvalImpl::Blocked),
            "blocked-noalloc" => Ok(EvalImpl::BlockedNoAlloc),
            other => Err(format!("unknown implementation {other:?}")),
        }
    }
}

/// One timed polynomial-evaluation run.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub op: String,
    pub implementation: String,
    pub backend: String,
    pub s: usize,
    pub n: usize,
    pub d: u32,
    pub t_count: u64,
    pub p: u64,
    pub t_i: usize,
    pub t_d: usize,
    pub unroll: usize,
    pub ms_total: f64,
    pub ns_per_term_eval: f64,
    pub cycles_per_term_eval: f64,
    pub gflops: f64,
    pub freq_mhz: f64,
    pub host: String,
}

impl BenchRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{:.3},{:.4},{:.4},{:.4},{:.1},{}",
            self.op,
            self.implementation,
            self.backend,
            self.s,
            self.n,
            self.d,
            self.t_count,
            self.p,
            self.t_i,
            self.t_d,
            self.unroll,
            self.ms_total,
            self.ns_per_term_eval,
            self.cycles_per_term_eval,
            self.gflops,
            self.freq_mhz,
            self.host
        )
    }
}

/// Times one evaluation configuration and returns its images plus the
/// record. `reps` repetitions after a warm-up; the median is reported.
#[allow(clippy::too_many_arguments)]
pub fn run_eval(
    f: &SparsePolynomial,
    modulus: &PrimeModulus,
    me: &MonomialEvals,
    t_count: u64,
    implementation: EvalImpl,
    plan: &EvalPlan,
    t_d: usize,
    unroll: usize,
    reps: usize,
) -> (Vec<BivariateImage>, BenchRecord) {
    let backend = plan.backend();
    let mut images = Vec::new();
    let mut run = || -> Duration {
        let t = Instant::now();
        images = match implementation {
            EvalImpl::IntScalar => {
                let mut fresh = me.clone();
                eval_scalar(&mut fresh, modulus, t_count)
            }
            EvalImpl::FpScalar => eval_scalar_fp(me, modulus, t_count),
            EvalImpl::Vector => eval_simd(me, modulus, t_count, backend),
            EvalImpl::Blocked => eval_blocked(me, modulus, t_count, plan),
            EvalImpl::BlockedNoAlloc => {
                eval_blocked_noalloc(me, modulus, t_count, t_d, unroll, backend)
                    .expect("validated plan fields")
            }
        };
        t.elapsed()
    };

    run(); // warm-up
    let med = median_of(reps.max(1), &mut run);

    let freq_mhz = estimate_tsc_mhz().unwrap_or(f64::NAN);
    let term_evals = (f.num_terms() as f64) * (t_count as f64);
    let ns = med.as_secs_f64() * 1e9 / term_evals;
    let record = BenchRecord {
        op: "polyeval".into(),
        implementation: implementation.name().into(),
        backend: match implementation {
            EvalImpl::IntScalar | EvalImpl::FpScalar => "-".into(),
            _ => backend.name().into(),
        },
        s: f.num_terms(),
        n: f.n(),
        d: f.max_evaluated_degree(),
        t_count,
        p: modulus.p(),
        t_i: plan.t_i(),
        t_d: if implementation == EvalImpl::BlockedNoAlloc {
            t_d
        } else {
            plan.t_d()
        },
        unroll: if implementation == EvalImpl::BlockedNoAlloc {
            unroll
        } else {
            plan.unroll()
        },
        ms_total: med.as_secs_f64() * 1e3,
        ns_per_term_eval: ns,
        cycles_per_term_eval: ns * freq_mhz / 1e3,
        gflops: FLOPS_TERM_EVAL / ns,
        freq_mhz,
        host: hostname(),
    };
    (images, record)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneRecord {
    pub t_i: usize,
    pub t_d: usize,
    pub unroll: usize,
    pub ms_total: f64,
    pub ns_per_term_eval: f64,
    pub gflops: f64,
}

impl TuneRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.3},{:.4},{:.4}",
            self.t_i, self.t_d, self.unroll, self.ms_total, self.ns_per_term_eval, self.gflops
        )
    }
}

/// Sweeps every `(T_i, T_d, M)` combination from `grid` and reports one
/// record per configuration plus the best one.
pub fn run_tune(
    f: &SparsePolynomial,
    modulus: &PrimeModulus,
    me: &MonomialEvals,
    t_count: u64,
    grid: &[usize],
    backend: Backend,
    reps: usize,
) -> (Vec<TuneRecord>, TuneRecord) {
    let term_evals = (f.num_terms() as f64) * (t_count as f64);
    let mut records = Vec::with_capacity(grid.len().pow(3));
    for &ti in grid {
        for &td in grid {
            for &mu in grid {
                let plan = EvalPlan::new(ti, td, mu, backend).expect("grid values are >= 1");
                let mut run = || -> Duration {
                    let t = Instant::now();
                    black_box(eval_blocked(me, modulus, t_count, &plan));
                    t.elapsed()
                };
                run(); // warm-up
                let med = median_of(reps.max(1), &mut run);
                let ns = med.as_secs_f64() * 1e9 / term_evals;
                records.push(TuneRecord {
                    t_i: ti,
                    t_d: td,
                    unroll: mu,
                    ms_total: med.as_secs_f64() * 1e3,
                    ns_per_term_eval: ns,
                    gflops: FLOPS_TERM_EVAL / ns,
                });
            }
        }
    }
    let best = *records
        .iter()
        .max_by(|a, b| a.gflops.total_cmp(&b.gflops))
        .expect("grid is nonempty");
    (records, best)
}

/// One verification mismatch, with enough context to locate it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyFailure {
    pub kernel: String,
    pub t: u64,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub kernels_checked: Vec<String>,
    pub images_checked: usize,
    pub failures: Vec<VerifyFailure>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// First point where two images disagree, if any.
pub fn first_divergence(got: &BivariateImage, want: &BivariateImage) -> Option<String> {
    if got.t != want.t {
        return Some(format!("image index mismatch: got t={}, want t={}", got.t, want.t));
    }
    for (i, (g, w)) in got.entries.iter().zip(&want.entries).enumerate() {
        if g != w {
            return Some(format!(
                "t={} entry {}: got {}*x1^{}*x2^{}, want {}*x1^{}*x2^{}",
                got.t, i, g.c, g.d, g.e, w.c, w.d, w.e
            ));
        }
    }
    if got.entries.len() != want.entries.len() {
        return Some(format!(
            "t={}: got {} entries, want {}",
            got.t,
            got.entries.len(),
            want.entries.len()
        ));
    }
    None
}

fn check_kernel(
    report: &mut VerifyReport,
    kernel: &str,
    got: &[BivariateImage],
    want: &[BivariateImage],
) {
    report.kernels_checked.push(kernel.to_string());
    for (g, w) in got.iter().zip(want) {
        if let Some(detail) = first_divergence(g, w) {
            report.failures.push(VerifyFailure {
                kernel: kernel.to_string(),
                t: w.t,
                detail,
            });
            return; // first divergence per kernel is enough
        }
    }
}

/// Exhaustively compares every kernel against the big-integer oracle for
/// all `t = 1..=t_count`. With `all_plans`, sweeps the blocked kernel over
/// `{1,2,4,8}^3` and the no-extra-memory kernel over `{1,2,4,8}^2`.
pub fn run_verify(
    f: &SparsePolynomial,
    modulus: &PrimeModulus,
    beta: &EvalPoint,
    me: &MonomialEvals,
    t_count: u64,
    all_plans: bool,
    backend: Backend,
) -> VerifyReport {
    let oracle: Vec<BivariateImage> = (1..=t_count)
        .map(|t| naive_evaluate(f, beta, t, modulus))
        .collect();
    let mut report = VerifyReport {
        images_checked: oracle.len(),
        ..Default::default()
    };

    let mut scalar_me = me.clone();
    let scalar = eval_scalar(&mut scalar_me, modulus, t_count);
    check_kernel(&mut report, "scalar", &scalar, &oracle);

    let simd = eval_simd(me, modulus, t_count, backend);
    check_kernel(&mut report, &format!("simd/{}", backend.name()), &simd, &oracle);

    let plan_values: &[usize] = if all_plans { &[1, 2, 4, 8] } else { &[1, 2] };
    for &ti in plan_values {
        for &td in plan_values {
            for &mu in plan_values {
                let plan = EvalPlan::new(ti, td, mu, backend).expect("plan values >= 1");
                let got = eval_blocked(me, modulus, t_count, &plan);
                check_kernel(
                    &mut report,
                    &format!("blocked({ti},{td},{mu})/{}", backend.name()),
                    &got,
                    &oracle,
                );
            }
        }
    }
    for &td in plan_values {
        for &mu in plan_values {
            let got = eval_blocked_noalloc(me, modulus, t_count, td, mu, backend)
                .expect("plan values >= 1");
            check_kernel(
                &mut report,
                &format!("noalloc({td},{mu})/{}", backend.name()),
                &got,
                &oracle,
            );
        }
    }
    report
}

/// Compares externally produced images (e.g. parsed from a file) against
/// the oracle for exactly the `t` values they claim to cover.
pub fn verify_images_against_oracle(
    images: &[BivariateImage],
    f: &SparsePolynomial,
    modulus: &PrimeModulus,
    beta: &EvalPoint,
) -> VerifyReport {
    let mut report = VerifyReport {
        images_checked: images.len(),
        kernels_checked: vec!["images-file".into()],
        ..Default::default()
    };
    for img in images {
        let want = naive_evaluate(f, beta, img.t, modulus);
        if let Some(detail) = first_divergence(img, &want) {
            report.failures.push(VerifyFailure {
                kernel: "images-file".into(),
                t: img.t,
                detail,
            });
            break;
        }
    }
    report
}

/// Samples `k` distinct `t` values and oracle-checks those images.
pub fn verify_sample(
    images: &[BivariateImage],
    f: &SparsePolynomial,
    modulus: &PrimeModulus,
    beta: &EvalPoint,
    k: usize,
    seed: u64,
) -> VerifyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..images.len()).collect();
    for i in (1..indices.len()).rev() {
        let j = rng.gen_range(0..=i);
        indices.swap(i, j);
    }
    indices.truncate(k.min(images.len()));
    let sampled: Vec<BivariateImage> = indices.iter().map(|&i| images[i].clone()).collect();
    verify_images_against_oracle(&sampled, f, modulus, beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{build_power_tables, evaluate_monomials};
    use crate::io::{generate, GenSpec};

    fn small_instance() -> (SparsePolynomial, PrimeModulus, EvalPoint, MonomialEvals) {
        let (f, m) = generate(&GenSpec {
            s: 40,
            n: 4,
            d: 5,
            p: 1048573,
            seed: 3,
        })
        .unwrap();
        let beta = EvalPoint::from_seed(f.n(), &m, 11);
        let tables = build_power_tables(&f, &beta, &m);
        let me = evaluate_monomials(&f, &tables, &m);
        (f, m, beta, me)
    }

    #[test]
    fn microbench_runs_every_impl() {
        let mut opts = MicrobenchOptions::new(MicrobenchOp::Mul, Backend::portable());
        opts.len = 64;
        opts.reps = 1;
        let records = run_microbench(&opts);
        assert_eq!(records.len(), MicrobenchImpl::ALL.len());
        for r in &records {
            assert!(r.ns_per_op > 0.0, "{r:?}");
        }
    }

    #[test]
    fn verify_passes_on_correct_kernels() {
        let (f, m, beta, me) = small_instance();
        let report = run_verify(&f, &m, &beta, &me, 9, false, Backend::portable());
        assert!(report.passed(), "{:?}", report.failures);
        assert!(report.kernels_checked.len() > 2);
    }

    #[test]
    fn corrupted_images_are_caught_with_location() {
        let (f, m, beta, me) = small_instance();
        let mut scalar_me = me.clone();
        let mut images = eval_scalar(&mut scalar_me, &m, 5);
        images[3].entries[0].c ^= 1;
        let report = verify_images_against_oracle(&images, &f, &m, &beta);
        assert!(!report.passed());
        assert_eq!(report.failures[0].t, 4);
        assert!(report.failures[0].detail.contains("t=4"));
    }

    #[test]
    fn eval_record_has_positive_throughput() {
        let (f, m, _beta, me) = small_instance();
        let plan = EvalPlan::new(2, 2, 1, Backend::portable()).unwrap();
        let (images, record) = run_eval(&f, &m, &me, 7, EvalImpl::Blocked, &plan, 1, 1, 1);
        assert_eq!(images.len(), 7);
        assert!(record.gflops > 0.0);
        assert_eq!(record.implementation, "blocked");
    }

    #[test]
    fn tune_best_is_max_gflops() {
        let (f, m, _beta, me) = small_instance();
        let (records, best) = run_tune(&f, &m, &me, 5, &[1, 2], Backend::portable(), 1);
        assert_eq!(records.len(), 8);
        assert!(records.iter().all(|r| r.gflops <= best.gflops));
    }
}
