"""Discrete causal models with certified approximate counterfactuals and transport."""

from .core import (
    Bits,
    Certificate,
    Table,
    Variable,
    conditional_entropy,
    distribution_percentile,
    entropy,
    kl_divergence,
    mutual_information,
    percentile,
)
from .counterfactuals import (
    CounterfactualQuery,
    approx_counterfactual,
    counterfactual_certificate,
    exact_counterfactual,
    generalized_approx_counterfactual,
)
from .errors import CausalError, PreconditionError, ValidationError
from .graphs import G1, G2, Dag
from .models import (
    CausalModel,
    Dataset,
    FunctionalModel,
    fit_cpt,
    induce_cgm,
    intervene,
    interventional_query,
    joint,
    query,
    sample,
    validate,
)
from .transport import TransportInputs, approx_transport, transport_bound, transport_certificate

__version__ = "0.1.0"
