__version__ = '0.1.0'

from .algebra import AlgebraShape, Element, SaSubspace
from .upmap import UPMap, build_map, kraus_map, map_from_document, stochastic_map
from .explainers import CommutativeExplainer, Tolerances, UPMapExplainer, make_explainer
from .verification import check_instance, run_suite
