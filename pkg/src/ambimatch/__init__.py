"""Graph matching of correlated random graphs with ambiguity-set side information."""

from .model import EdgeDistribution, GraphPair, Labeling, load_distribution, product_distribution
from .graphgen import RngStream, sample_pair
from .ambiguity import AmbiguityMatrix, generate, permanent_01
from .typicality import TypicalityParams, default_epsilon, is_jointly_typical
from .matcher import enumerate_consistent, tm_match, typical_candidates
from .theory import check_necessary, check_sufficient, exponent, union_bound_failure_estimate

__version__ = "0.1.0"
