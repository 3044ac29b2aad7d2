mod common;

#[test]
fn series_ring_axioms() {
    common::ring_axioms().unwrap();
}

#[test]
fn borel_transform_is_linear() {
    common::borel_linearity().unwrap();
}

#[test]
fn paths_reverse_and_deform() {
    common::path_reversal_and_homotopy().unwrap();
}

#[test]
fn determinant_follows_trace() {
    common::abel_liouville().unwrap();
}

#[test]
fn stokes_matrices_are_unipotent_and_constant() {
    common::stokes_unipotent_and_constant().unwrap();
}

#[test]
fn torus_generators_do_not_depend_on_t() {
    common::torus_constant_in_t().unwrap();
}
