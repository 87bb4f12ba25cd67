"""Phase-space entropy of billiard eigenstates, wave-packet dynamics and random waves."""

from .berry import (BerryEnsembleSpec, EntropySpectrum, entropy_spectrum, fluctuation_vs_ratio,
                    microcanonical_average, sample_berry_state, scar_fraction)
from .dynamics import (EntropyTimeSeries, ExpansionCoefficients, GaussianPacket, HybridDynamicsSpec, entropy_series,
                       evolve_state, expand_initial, fluctuation_metric, make_hybrid, revival_metric)
from .oracles import HarmonicOscillatorSpec, gaussian_overlap_reference, ho_eigenstate, square_reference_series
from .phasespace import (PhaseSpaceDistribution, WannierBasis, WannierLatticeParams, build_wannier_1d,
                         build_wannier_2d, entropy, project)
from .spectral import (BilliardGeometry, SpectralDecomposition, build_geometry, solve_ripple, solve_square,
                       verify_spectrum)

__version__ = "0.1.0"
