"""Star-shaped mean curvature flow laboratory."""

from ._starflow import (
    RadialGraph,
    StarflowError,
    advance_to,
    compute_F,
    compute_frame,
    dumbbell,
    ellipse,
    evaluate_properties,
    max_threads,
    noncollapsing,
    perturbed_sphere,
    run_experiment,
    select_dt,
    set_num_threads,
    solve_arrival,
    sphere,
    sphere_weighted_area,
    star_gauge,
    step,
    weighted_area,
)

__all__ = [name for name in dir() if not name.startswith("_")]
