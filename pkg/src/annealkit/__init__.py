"""Adaptive annealing schedules from semi-classical spin dynamics.

The pipeline: define or mine an Ising instance, integrate its mean-field
Bloch dynamics, evolve the Gaussian fluctuations to locate the adiabatic
bottleneck, synthesize a geodesic schedule centered there, and verify the
success-probability gain with exact Trotterized state-vector simulation.
"""

from .errors import (
    AnnealkitError,
    DegenerateSpectrumError,
    IntegrationError,
    InvalidArgumentError,
    ParseError,
    ShootingError,
    SizeGuardError,
)
from .instance import (
    ClauseSet,
    IsingInstance,
    brute_force_optimum,
    energy,
    generate_sk,
    load_instance,
    map_clauses_to_ising,
    parse_max2sat,
    save_instance,
)
from .meanfield import (
    FrustrationReport,
    SpinTrajectory,
    ea_parameter,
    frustration_report,
    integrate_meanfield,
    mf_energy,
)
from .fluctuations import (
    BottleneckCandidate,
    FluctuationRecord,
    ParamagnonBlocks,
    build_blocks,
    detect_bottlenecks,
    evolve_statistical_function,
    localization_susceptibility,
)
from .schedule import (
    GeodesicParams,
    ScheduleFunction,
    exact_christoffel_schedule,
    gaussian_force,
    linear_schedule,
    lorentzian_force,
    qaoa_angles,
    solve_geodesic,
)
from .exactsim import (
    GapProfile,
    LevelDistribution,
    SpectrumRecord,
    eigenstate_distribution,
    gap_profile,
    instantaneous_spectrum,
    metric_tensor,
    scalar_metric,
    success_probability,
    trotter_evolve,
)

__version__ = "0.1.0"
