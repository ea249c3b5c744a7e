//! Backend selection and the lane-parallel operations.
//!
//! ```bash
//! cargo run --release -p modeval --example simd_backends
//! ```

use modeval::simd::{backend_select, Backend, BackendRequest, FieldVector, LaneMask};
use modeval::PrimeModulus;

fn main() {
    let auto = backend_select(BackendRequest::Auto).unwrap();
    println!("auto-selected backend: {} ({} lanes)", auto.name(), auto.lanes());
    for request in [BackendRequest::Portable, BackendRequest::V4, BackendRequest::V8] {
        match backend_select(request) {
            Ok(b) => println!("  {:9} available, {} lanes", b.name(), b.lanes()),
            Err(e) => println!("  {e}"),
        }
    }

    let m = PrimeModulus::new(1073741789).unwrap();
    for backend in Backend::all_supported() {
        let w = backend.lanes();
        let xs: Vec<f64> = (0..w).map(|i| (123456789 + i as u64 * 1013) as f64).collect();
        let ys: Vec<f64> = (0..w).map(|i| (987654321 + i as u64 * 7477) as f64).collect();
        let x = FieldVector::from_slice(&xs);
        let y = FieldVector::from_slice(&ys);

        let prod = backend.vmulmod(&x, &y, &m);
        let total = backend.vreduce_addmod(&prod, &m);
        println!(
            "\n[{}] lane products {:?}",
            backend.name(),
            prod.lanes().iter().map(|&v| v as u64).collect::<Vec<_>>()
        );
        println!("[{}] tree-reduced sum of products = {}", backend.name(), total as u64);

        // One masked Hadamard step over a ragged three-element span.
        let mut a: Vec<f64> = (0..w).map(|i| (i as u64 + 1) as f64).collect();
        let mv: Vec<f64> = (0..w).map(|_| 2.0).collect();
        let mut acc = FieldVector::zero(w);
        backend.masked_vmulmod_accumulate(&m, &mut a, &mv, 0, &LaneMask::first(w, 3), &mut acc);
        println!(
            "[{}] masked step (first 3 lanes doubled): a = {:?}",
            backend.name(),
            a.iter().map(|&v| v as u64).collect::<Vec<_>>()
        );
    }
}
