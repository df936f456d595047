use acblocks::{overlap, AreaId, Brain, FiberDirection, OpError, ProjectOptions, StrongProjectOptions};

fn stimulus(seed: u64, n: u32, k: u32) -> (Brain, AreaId, AreaId) {
    let mut b = Brain::new(0.1, seed, 0.1).unwrap();
    let s = b.add_explicit_area("S", 3, k).unwrap();
    let x = b.add_area("X", n, k, 0.1).unwrap();
    b.connect(s, x).unwrap();
    b.set_area_inhibition(x, false).unwrap();
    b.set_fiber_inhibition(s, x, false, FiberDirection::Forward).unwrap();
    b.activate_block(s, 2).unwrap();
    (b, s, x)
}

#[test]
fn strong_projection_of_a_clamped_pair_is_project() {
    for seed in 0..4 {
        let (mut a, s, x) = stimulus(seed, 3000, 40);
        let projected = a.project(s, x, ProjectOptions::default()).unwrap();

        let (mut b, s2, x2) = stimulus(seed, 3000, 40);
        b.set_area_inhibition(s2, false).unwrap();
        let strong = b.strong_project(StrongProjectOptions::default()).unwrap();

        assert_eq!(strong.rounds, projected.rounds);
        assert_eq!(strong.converged, projected.converged);
        assert_eq!(b.winners(x2), projected.assembly.neurons.as_slice());
        let mut ea: Vec<_> = a.fiber(s, x).unwrap().edges().collect();
        let mut eb: Vec<_> = b.fiber(s2, x2).unwrap().edges().collect();
        ea.sort_unstable();
        eb.sort_unstable();
        assert_eq!(ea, eb);
    }
}

#[test]
fn converged_projection_is_a_fixed_point() {
    let mut stable = 0;
    for seed in 0..10 {
        let (mut b, s, x) = stimulus(seed, 10_000, 100);
        let r = b.project(s, x, ProjectOptions::default()).unwrap();
        assert!(r.converged);
        let again = b
            .project(
                s,
                x,
                ProjectOptions {
                    max_rounds: 1,
                    ..Default::default()
                },
            )
            .unwrap();
        if overlap(&again.assembly.neurons, &r.assembly.neurons) == 1.0 {
            stable += 1;
        }
    }
    assert_eq!(stable, 10);
}

#[test]
fn project_leaves_other_areas_alone() {
    let (mut b, s, x) = stimulus(1, 2000, 30);
    let y = b.add_area("Y", 2000, 30, 0.1).unwrap();
    b.connect(x, y).unwrap();
    b.set_winners(y, &(0..30).collect::<Vec<_>>()).unwrap();
    b.project(s, x, ProjectOptions::default()).unwrap();
    assert_eq!(b.winners(y), (0..30).collect::<Vec<_>>().as_slice());
    assert_eq!(b.winners(s), (30..60).collect::<Vec<_>>().as_slice());
    assert_eq!(b.fiber(x, y).unwrap().sampled_rows(), 0);
}

#[test]
fn inhibited_flags_block_project_but_not_drive() {
    let (mut b, s, x) = stimulus(2, 2000, 30);
    b.set_fiber_inhibition(s, x, true, FiberDirection::Both).unwrap();
    assert_eq!(b.project(s, x, ProjectOptions::default()), Err(OpError::InhibitedFiber(s, x)));
    let r = b.drive(s, x, ProjectOptions::default());
    assert_eq!(r.assembly.neurons.len(), 30);
}

#[test]
fn probe_separates_trained_from_random() {
    let (mut b, s, x) = stimulus(3, 10_000, 50);
    b.set_area_inhibition(s, false).unwrap();
    b.strong_project(StrongProjectOptions {
        min_rounds: 30,
        max_rounds: 40,
        ..Default::default()
    })
    .unwrap();
    assert!(b.is_assembly(x, 0.95).unwrap());
    let random: Vec<u32> = (0..50).map(|i| i * 199 + 7).collect();
    b.set_winners(x, &random).unwrap();
    assert!(!b.is_assembly(x, 0.75).unwrap());
    b.clear_winners(x).unwrap();
    assert!(!b.is_assembly(x, 0.75).unwrap());
}
