use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use relwave::bundle::{lift_state, lower_state};
use relwave::evolution::io::{read_snapshot, write_snapshot};
use relwave::evolution::{step, Method};
use relwave::frames::{FibreMap, FrameFamily, FrameScope};
use relwave::lattice::{Grid, Hermiticity, LatticeOperator};
use relwave::linalg;
use relwave::reduction::{frame_change, Hamiltonian};
use relwave::state::StateVector;
use relwave::C64;

fn random_system(seed: u64, n: usize) -> (DMatrix<C64>, StateVector) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = linalg::random_hermitian(n, &mut rng);
    let psi = StateVector::new(Grid::single_site(), n, linalg::random_vector(n, &mut rng), 0.0).unwrap();
    (m, psi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn crank_nicolson_preserves_the_norm(seed in any::<u64>(), n in 1usize..8, dt in 1e-3f64..2.0) {
        let (m, psi) = random_system(seed, n);
        let h = Hamiltonian::constant(LatticeOperator::from_dense(&m, Hermiticity::Hermitian), 1.0).unwrap();
        let next = step(&h, &psi, 0.0, dt, Method::CrankNicolson).unwrap();
        prop_assert!((next.norm() - psi.norm()).abs() <= 1e-13 * psi.norm());
    }

    #[test]
    fn lifting_then_lowering_is_the_identity(seed in any::<u64>(), t in -3.0f64..3.0, amp in 0.0f64..0.8) {
        let (_, psi) = random_system(seed, 5);
        let frames = FrameFamily::smooth_random(5, FrameScope::Local, seed, amp, 2, 1.1).unwrap();
        let back = lower_state(&frames, &lift_state(&frames, &psi, t).unwrap(), t).unwrap();
        prop_assert!(back.distance(&psi).unwrap() <= 1e-12 * psi.norm());
    }

    #[test]
    fn static_frame_changes_invert(seed in any::<u64>(), amp in 0.0f64..0.8) {
        let (m, _) = random_system(seed, 4);
        let op = LatticeOperator::from_dense(&m, Hermiticity::Hermitian);
        let a = FrameFamily::smooth_random(4, FrameScope::Local, seed ^ 1, amp, 1, 1.0).unwrap().at(0.2).unwrap();
        let a_inv = a.inverse(0.2, 1e8).unwrap();
        let there = frame_change(&op, &a, &FibreMap::zero(), 1.0, 0.2).unwrap();
        let back = frame_change(&there, &a_inv, &FibreMap::zero(), 1.0, 0.2).unwrap();
        prop_assert!(back.matrix().max_abs_diff(op.matrix()) <= 1e-12 * (1.0 + m.norm()));
    }

    #[test]
    fn site_coordinates_round_trip(dim in 1usize..=3, half in 2usize..6) {
        let g = Grid::new(dim, 2 * half, 3.0).unwrap();
        for s in 0..g.num_sites() {
            prop_assert_eq!(g.site_index(g.site_coords(s)), s);
        }
    }

    #[test]
    fn snapshots_round_trip_bitwise(values in prop::collection::vec((-1e300f64..1e300, -1e-300f64..1e-300), 16), t in -1e9f64..1e9) {
        let g = Grid::new(1, 8, 2.5).unwrap();
        let data: Vec<C64> = values.iter().map(|(a, b)| C64::new(*a, *b)).collect();
        let s = StateVector::new(g, 2, data, t).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &s).unwrap();
        let back = read_snapshot(buf.as_slice()).unwrap();
        prop_assert_eq!(back.time().to_bits(), t.to_bits());
        prop_assert!(back.data().iter().zip(s.data()).all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits()));
    }
}
