__all__ = ['Tolerances',
           'UPMapExplainer',
           'CommutativeExplainer',
           'make_explainer',
           ]

import itertools
import json
import logging
from dataclasses import asdict, dataclass, replace

import numpy as np
import pandas as pd

from . import __version__
from .algebra import span_coords
from .asymptotics import (AsymptoticProfile, check_decay_condition, decay_radius,
                          embedding_diagnostics, peripheral_idempotent,
                          restricted_automorphism, superop_spectrum, tail_system)
from .corestruct import (CoreReport, b_phi, definite_set, is_jordan_closed, jordan_generated,
                         largest_jordan_subalgebra, multiplicative_core)
from .errors import InputError
from .states import (StateReport, complement_decay_records, exists_faithful_invariant_state,
                     exists_invariant_state_faithful_on, invariant_state, support_projection)
from .upmap import is_faithful_map, map_to_document, validate_up

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Tolerances:
    """numerical knobs of an analysis

    Args:
        tol: relative rank threshold for all subspace computations
        eps_per: width of the peripheral band 1 - eps_per <= |z| <= 1
        n_max: length of the trace norm sequences
        check_tol: residual tolerance for memberships, faithfulness and properties
        samples: random samples per sampled check
        cone_samples: PSD samples for the order automorphism check
    """
    tol: float = 1e-9
    eps_per: float = 1e-8
    n_max: int = 512
    check_tol: float = 1e-6
    samples: int = 64
    cone_samples: int = 256

    def to_json(self):
        return asdict(self)


class UPMapExplainer:
    """Asymptotic analysis of a unital positive map.

    Every stage of the analysis is a lazily calculated, cached property, so
    e.g. explainer.core only computes what the multiplicative core needs.
    """
    def __init__(self, phi, tolerances=None, seed=0, name=None, **kwargs):
        """
        :param phi: the map to analyse
        :type phi: UPMap
        :param tolerances: numerical tolerances, defaults to Tolerances()
        :type tolerances: Tolerances, optional
        :param seed: seed for all sampled checks, defaults to 0
        :type seed: int
        :param name: label used in reports, defaults to None
        :type name: str, optional
        :param kwargs: individual overrides of the tolerances, e.g. n_max=1024
        """
        tolerances = Tolerances() if tolerances is None else tolerances
        unknown = set(kwargs) - set(asdict(tolerances))
        if unknown:
            raise InputError(f"unknown tolerance settings: {sorted(unknown)}")
        self.phi = phi
        self.shape = phi.shape
        self.tolerances = replace(tolerances, **kwargs)
        self.seed = 0 if seed is None else int(seed)
        self.name = name

    def __repr__(self):
        return f"{self.__class__.__name__}({self.phi!r}, seed={self.seed})"

    @property
    def validation(self):
        if not hasattr(self, '_validation'):
            self._validation = validate_up(self.phi, self.tolerances.samples,
                                           self.tolerances.check_tol, self.seed)
        return self._validation

    @property
    def spectrum(self):
        """eigenvalues of phi with algebraic and geometric multiplicities"""
        if not hasattr(self, '_spectrum'):
            log.info("Calculating spectrum...")
            self._spectrum = superop_spectrum(self.phi)
        return self._spectrum

    @property
    def idempotent(self):
        """the idempotent limit E of the powers of phi"""
        if not hasattr(self, '_idempotent'):
            self._idempotent = peripheral_idempotent(self.phi, self.tolerances.eps_per)
        return self._idempotent

    @property
    def tail(self):
        """M_inf, the range of E"""
        if not hasattr(self, '_tail'):
            self._tail = tail_system(self.phi, self.tolerances.eps_per, self.tolerances.tol,
                                     E=self.idempotent)
        return self._tail

    @property
    def restricted(self):
        if not hasattr(self, '_restricted'):
            t = self.tolerances
            self._restricted = restricted_automorphism(
                self.phi, self.tail, E=self.idempotent, tol=t.tol, check_tol=t.check_tol,
                samples=t.samples, cone_samples=t.cone_samples, seed=self.seed)
        return self._restricted

    @property
    def profile(self):
        if not hasattr(self, '_profile'):
            eps = self.tolerances.eps_per
            self._profile = AsymptoticProfile(
                E=self.idempotent,
                M_inf=self.tail,
                restricted=self.restricted.matrix,
                peripheral_eigenvalues=[e.eigenvalue for e in self.spectrum
                                        if e.modulus >= 1 - eps],
                decay_radius=decay_radius(self.phi, eps),
                spectrum=self.spectrum,
                automorphism=self.restricted)
        return self._profile

    @property
    def embedding(self):
        if not hasattr(self, '_embedding'):
            t = self.tolerances
            self._embedding = embedding_diagnostics(
                self.phi, E=self.idempotent, M_inf=self.tail, restricted=self.restricted,
                eps_per=t.eps_per, check_tol=t.check_tol, samples=t.samples,
                n_max=t.n_max, seed=self.seed)
        return self._embedding

    @property
    def definite(self):
        """the definite set M_phi"""
        if not hasattr(self, '_definite'):
            self._definite = definite_set(self.phi, self.tolerances.tol)
        return self._definite

    @property
    def b_phi(self):
        if not hasattr(self, '_b_phi'):
            self._b_phi = b_phi(self.phi, self.definite, self.tolerances.tol)
        return self._b_phi

    @property
    def core(self):
        """the multiplicative core C_phi"""
        if not hasattr(self, '_core'):
            self._core = multiplicative_core(self.phi, self.b_phi, self.tolerances.tol)
        return self._core

    @property
    def jordan_closure(self):
        """Jordan algebra generated by M_inf"""
        if not hasattr(self, '_jordan_closure'):
            self._jordan_closure = jordan_generated(self.tail, self.tolerances.tol)
        return self._jordan_closure

    @property
    def core_report(self):
        if not hasattr(self, '_core_report'):
            t = self.tolerances
            self._core_report = CoreReport(
                definite_set=self.definite,
                b_phi=self.b_phi,
                core=self.core,
                m_inf_jordan_closed=is_jordan_closed(self.tail, t.check_tol),
                largest_jordan_in_tail=largest_jordan_subalgebra(self.tail, self.idempotent,
                                                                 t.tol),
                core_equals_tail=self.core.equals(self.tail, t.check_tol))
        return self._core_report

    @property
    def invariant_state(self):
        if not hasattr(self, '_invariant_state'):
            self._invariant_state = invariant_state(self.phi)
        return self._invariant_state

    @property
    def state_report(self):
        if not hasattr(self, '_state_report'):
            t = self.tolerances
            log.info("Calculating decay of functionals orthogonal to the core...")
            rho = self.invariant_state
            self._state_report = StateReport(
                invariant_state=rho,
                maximal_support=support_projection(rho, t.tol),
                faithful_exists=exists_faithful_invariant_state(self.phi, t.tol, rho),
                decay_records=complement_decay_records(self.phi, self.core, self.idempotent,
                                                       t.n_max, t.check_tol),
                faithful_on_jordan_generated=exists_invariant_state_faithful_on(
                    self.phi, self.jordan_closure, t.tol, rho, t.check_tol))
        return self._state_report

    @property
    def faithful_map(self):
        if not hasattr(self, '_faithful_map'):
            self._faithful_map = is_faithful_map(self.phi, self.tolerances.tol)
        return self._faithful_map

    @property
    def decay_condition(self):
        """lim ||phi^n(x)|| = 0 only for x = 0, i.e. E is faithful"""
        if not hasattr(self, '_decay_condition'):
            self._decay_condition = check_decay_condition(self.phi, self.tolerances.tol,
                                                          E=self.idempotent)
        return self._decay_condition

    @property
    def verdicts(self):
        if not hasattr(self, '_verdicts'):
            self._verdicts = {
                "m_inf_equals_core": self.core_report.core_equals_tail,
                "m_inf_jordan_closed": self.core_report.m_inf_jordan_closed,
                "decay_condition": self.decay_condition,
                "faithful_map": self.faithful_map,
                "faithful_invariant_state": self.state_report.faithful_exists,
                "positivity_verified": self.phi.certified_positive,
            }
        return self._verdicts

    @property
    def properties(self):
        """one row per checked property: property, passed, residual"""
        if not hasattr(self, '_properties'):
            from .verification import check_explainer
            log.info("Calculating property checks...")
            self._properties = check_explainer(self, self.seed)
        return self._properties

    @property
    def report(self):
        """the full analysis report as an ordered dict"""
        if not hasattr(self, '_report'):
            self._report = {
                "tool": "tailcore",
                "version": __version__,
                "name": self.name,
                "seed": self.seed,
                "tolerances": self.tolerances.to_json(),
                "input": map_to_document(self.phi),
                "validation": self.validation.to_json(),
                "asymptotics": self.profile.to_json(),
                "embedding": self.embedding.to_json(),
                "core": self.core_report.to_json(),
                "jordan_closure": {"dim": self.jordan_closure.dim,
                                   "basis": self.jordan_closure.to_json()},
                "states": self.state_report.to_json(),
                "verdicts": dict(self.verdicts),
                "properties": [
                    {"property": r.property, "passed": bool(r.passed),
                     "residual": None if np.isnan(r.residual) else float(r.residual)}
                    for r in self.properties.itertuples()],
            }
        return self._report

    def calculate_properties(self, include_properties=True):
        """Explicitely calculates all lazily calculated properties.

        Args:
            include_properties(bool): also run the property checks, defaults to True
        """
        _ = (self.validation, self.spectrum, self.idempotent, self.tail, self.restricted,
             self.profile, self.embedding, self.definite, self.b_phi, self.core,
             self.core_report, self.invariant_state, self.state_report, self.verdicts)
        if include_properties:
            _ = self.properties

    def dims(self):
        """dimensions of the subspaces in the analysis"""
        return {"D": self.shape.D,
                "M_inf": self.tail.dim,
                "definite_set": self.definite.dim,
                "b_phi": self.b_phi.dim,
                "core": self.core.dim,
                "largest_jordan_in_tail": self.core_report.largest_jordan_in_tail.dim,
                "jordan_closure": self.jordan_closure.dim}

    def spectrum_df(self):
        return self.profile.spectrum_df()

    def verdicts_df(self):
        return pd.DataFrame(list(self.verdicts.items()), columns=['verdict', 'value'])

    def dims_df(self):
        return pd.DataFrame(list(self.dims().items()), columns=['subspace', 'dim'])

    def decay_df(self):
        """trace norm sequences of the functionals orthogonal to the core,
        columns functional, n, trace_norm"""
        return self.state_report.decay_df()

    def verdicts_markdown(self, round=6):
        """markdown summary of dimensions, verdicts and failed properties"""
        title = self.name or f"UP map on {list(self.shape.block_dims)}"
        md = f"# Asymptotic profile: {title}\n\n"
        md += "## Subspaces\n\n"
        for k, v in self.dims().items():
            md += f"- {k}: {v}\n"
        md += "\n## Verdicts\n\n"
        for k, v in self.verdicts.items():
            md += f"- {k}: {v}\n"
        md += "\n## Spectrum\n\n"
        for e in self.spectrum:
            z = complex(np.round(e.eigenvalue, round))
            md += f"- {z} (algebraic {e.algebraic}, geometric {e.geometric})\n"
        if self.restricted.period is not None:
            md += f"\nphi restricted to M_inf has period {self.restricted.period}\n"
        failed = self.properties[~self.properties.passed]
        md += "\n## Properties\n\n"
        if failed.empty:
            md += f"all {len(self.properties)} properties hold\n"
        for r in failed.itertuples():
            md += f"- FAILED {r.property} (residual {r.residual:.3e})\n"
        return md

    def to_json(self, indent=2):
        return json.dumps(self.report, indent=indent)


class CommutativeExplainer(UPMapExplainer):
    """Explainer for maps on C^n (all blocks 1x1), e.g. stochastic matrices.

    Here the projections of the algebra are the 0/1 vectors, so the ones lying in
    M_inf can be listed exhaustively.
    """
    max_enumeration_dim = 20

    def __init__(self, phi, tolerances=None, seed=0, name=None, **kwargs):
        if not phi.shape.is_commutative:
            raise InputError(f"CommutativeExplainer needs 1x1 blocks, got {phi.shape}",
                             code="BLOCK_MISMATCH")
        super().__init__(phi, tolerances, seed, name, **kwargs)

    @property
    def stochastic_matrix(self):
        return self.phi.sa_matrix

    def projections_in_tail(self):
        """all 0/1 vectors (projections of C^n) that lie in M_inf"""
        if not hasattr(self, '_projections_in_tail'):
            n = self.shape.D
            if n > self.max_enumeration_dim:
                raise InputError(f"enumerating 2^{n} projections is not feasible")
            log.info(f"Calculating projections in M_inf (2^{n} candidates)...")
            candidates = np.array(list(itertools.product([0.0, 1.0], repeat=n)))
            residual = candidates - candidates @ self.tail.projector
            keep = (np.linalg.norm(residual, axis=1)
                    <= self.tolerances.check_tol * (1 + np.linalg.norm(candidates, axis=1)))
            self._projections_in_tail = candidates[keep]
        return self._projections_in_tail

    def projection_span(self):
        """linear span of the projections lying in M_inf"""
        projections = self.projections_in_tail()
        if len(projections) == 0:
            return span_coords(self.shape, np.zeros((self.shape.D, 0)))
        return span_coords(self.shape, projections.T, self.tolerances.tol)


def make_explainer(phi, tolerances=None, seed=0, name=None, **kwargs):
    """CommutativeExplainer for maps on C^n, UPMapExplainer otherwise"""
    if phi.shape.is_commutative:
        return CommutativeExplainer(phi, tolerances, seed, name, **kwargs)
    return UPMapExplainer(phi, tolerances, seed, name, **kwargs)
