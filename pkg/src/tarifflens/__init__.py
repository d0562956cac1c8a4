"""Assess how well a retail price scheme tracks each consumer's marginal cost impact."""
from .assess import assess_scheme, doc, dt, dt_bruteforce, subsidy_ledger
from .cluster import AdaptiveProfileKMeans, ClusterModel, ProfileKMeans, adaptive_fit, assign, kmeans_fit
from .core import AggregateProfile, DailyProfile, NormalizedProfile, Partition, ProfileNormalizer, aggregate, normalize
from .equilibrium import QuadraticConsumer, SupplyCurve, market_equilibrium, ppm_demand, rtp_demand
from .errors import TariffLensError
from .impact import FeatureSpec, MarginalImpactTransformer, features, mci_from_rtp, mci_index, mfi, mfi_fd
from .ingest import Dataset, GapPolicy, build_dataset, parse_readings, read_dataset, write_dataset
from .synth import SynthSpec, generate
from .tariff import Flat, ProfileMenu, RealTime, Tiered, TimeOfUse, bill, partition_by_rate

__version__ = "0.1.0"
__all__ = [
    "AdaptiveProfileKMeans",
    "AggregateProfile",
    "ClusterModel",
    "DailyProfile",
    "Dataset",
    "FeatureSpec",
    "Flat",
    "GapPolicy",
    "MarginalImpactTransformer",
    "NormalizedProfile",
    "Partition",
    "ProfileKMeans",
    "ProfileMenu",
    "ProfileNormalizer",
    "QuadraticConsumer",
    "RealTime",
    "SupplyCurve",
    "SynthSpec",
    "TariffLensError",
    "Tiered",
    "TimeOfUse",
    "adaptive_fit",
    "aggregate",
    "assess_scheme",
    "assign",
    "bill",
    "build_dataset",
    "doc",
    "dt",
    "dt_bruteforce",
    "features",
    "generate",
    "kmeans_fit",
    "market_equilibrium",
    "mci_from_rtp",
    "mci_index",
    "mfi",
    "mfi_fd",
    "normalize",
    "parse_readings",
    "partition_by_rate",
    "ppm_demand",
    "read_dataset",
    "rtp_demand",
    "subsidy_ledger",
    "write_dataset",
]
