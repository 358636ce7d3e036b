"""Tools for studying spontaneous symmetry breaking in dissipative
spin lattices: local Lindblad generators in the Heisenberg picture,
detailed-balance certification, dressed low-lying states, defect
scans, and Glauber Monte Carlo on large tori.
"""

__version__ = "0.1.0"

from .lattice import Lattice, Region, torus_distance, ball, enlarge
from .algebra import (
    PAULI, PAULI_X, PAULI_Y, PAULI_Z, ID2,
    LocalOperator, GlobalOperator,
    embed, single_site, extensive_observable, total_spin,
    commutator, adjoint, hs_inner, op_norm, pauli_string, identity,
)
from .generators import (
    Liouvillian, LocalLindbladTerm, SpectralLindbladTerm, TruncationReport,
    glauber_rate, kms_rate, ising_hamiltonian, heisenberg_hamiltonian,
    lattice_edges, heat_bath_ising, davies_generator, pair_singlet_generator,
    detailed_balance_defect, symmetry_defect, truncate, restrict,
)
from .states import (
    StateFunctional, OrderParameterPair, DressedFunctional,
    gibbs, fluctuation_ratio, tilted_pair, spin_order_parameters,
    raising_operator, charge_sector_norms, kt_functional, kt_state,
    goldstone_twist, twisted_state,
)
from .defects import (
    DefectSeries, KomaLemmaReport,
    leibniz_defect, metastability_defect, reversibility_defect,
    kt_reversibility_defect, koma_lemma_check, fit_exponent,
)
from .dynamics import (
    Trajectory, evolve_observable, evolve_state, exact_evolve_observable,
    observable_trajectory, lieb_robinson_defect, survival_time,
)
from .glauber_mc import (
    SpinConfig, SurvivalStats, heat_bath_step, run_sweeps, mc_survival_time,
)
