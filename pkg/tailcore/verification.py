"""
Property checks run on every analysed instance and the seeded random suites
behind `tailcore verify`.

Every check takes an explainer (which caches the whole asymptotic analysis) and
an rng, and returns (passed, residual). Checks whose hypothesis does not apply
to the instance pass with residual NaN.
"""
__all__ = ['PROPERTY_CHECKS',
           'check_explainer',
           'check_instance',
           'suite_tolerances',
           'check_generated',
           'SuiteResult',
           'run_suite',
           ]

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List

import numpy as np
import pandas as pd
import scipy.linalg as la

from .algebra import Element, hs_inner, min_eigenvalue, norm, trace_norms
from .asymptotics import decay_horizon, decay_radius, intrinsic_jordan, power_limit_oracle
from .corestruct import jordan_multiplicativity_residual, schwarz_defect
from .datasets import SUITES, generate_instance, instance_seed
from .errors import NumericalToleranceError
from .states import core_tail_criterion
from .upmap import Cert, adjoint, apply, map_to_document, power, random_sa

log = logging.getLogger(__name__)

STRICT_TOL = 1e-8
VACUOUS = (True, float('nan'))
N_MAX_CAP = 1 << 16
# tolerance decisions that are genuinely ambiguous; anything else is a failure
SKIPPABLE_CODES = ('RANK_TOL_AMBIGUOUS', 'SPECTRAL_GAP_AMBIGUOUS')


def _unital(ex, rng):
    r = ex.phi.unital_residual
    return r <= 1e-9, r


def _kadison_schwarz(ex, rng):
    if not ex.phi.certified_positive:
        return VACUOUS
    worst = 0.0
    for _ in range(ex.tolerances.samples // 4 or 1):
        x = random_sa(ex.shape, rng)
        worst = min(worst, min_eigenvalue(schwarz_defect(ex.phi, x)) / (1 + norm(x) ** 2))
    return worst >= -STRICT_TOL, -worst


def _power_consistency(ex, rng):
    x = random_sa(ex.shape, rng)
    y, worst = x, 0.0
    for n in range(1, 65):
        y = apply(ex.phi, y)
        if n in (1, 2, 7, 16, 64):
            worst = max(worst, norm(y - apply(power(ex.phi, n), x)) / norm(x))
    return worst <= STRICT_TOL, worst


def _adjoint_duality(ex, rng):
    phi_dag = adjoint(ex.phi)
    worst = float(la.norm(adjoint(phi_dag).sa_matrix - ex.phi.sa_matrix))
    for _ in range(8):
        R, x = random_sa(ex.shape, rng), random_sa(ex.shape, rng)
        worst = max(worst, abs(hs_inner(apply(phi_dag, R), x) - hs_inner(R, apply(ex.phi, x))))
    return worst <= 1e-10 * ex.shape.D, worst


def _stochastic_faithful_oracle(ex, rng):
    if ex.phi.cert is not Cert.STOCHASTIC:
        return VACUOUS
    columns_nonzero = bool((ex.phi.sa_matrix.sum(axis=0) > 0).all())
    return ex.faithful_map == columns_nonzero, float(ex.phi.sa_matrix.sum(axis=0).min())


def _idempotent(ex, rng):
    E, M = ex.idempotent.sa_matrix, ex.phi.sa_matrix
    u = ex.shape.unit_coords
    residual = max(la.norm(E @ E - E), la.norm(E @ M - M @ E), la.norm(E @ u - u))
    return residual <= STRICT_TOL, float(residual)


def _decay_on_kernel(ex, rng):
    n = decay_horizon(ex.profile.decay_radius, dim=ex.shape.D)
    M, E = ex.phi.sa_matrix, ex.idempotent.sa_matrix
    residual = la.norm(np.linalg.matrix_power(M, n) @ (np.eye(ex.shape.D) - E), 2)
    return residual <= ex.tolerances.check_tol, float(residual)


def _oracle_agreement(ex, rng):
    oracle = power_limit_oracle(ex.phi)
    residual = la.norm(oracle.E.sa_matrix - ex.idempotent.sa_matrix, 2)
    return residual <= ex.tolerances.check_tol, float(residual)


def _tail_isometry(ex, rng):
    r = ex.restricted.isometry_residual
    return r <= STRICT_TOL, r


def _dual_norm_identity(ex, rng):
    n = max(200, decay_horizon(ex.profile.decay_radius, dim=ex.shape.D))
    MT, ET = ex.phi.sa_matrix.T, ex.idempotent.sa_matrix.T
    MnT = np.linalg.matrix_power(MT, n)
    worst, monotone = 0.0, True
    for _ in range(10):
        r = rng.standard_normal(ex.shape.D)
        seq = trace_norms(ex.shape, [r, MT @ r, MT @ MT @ r])
        monotone &= bool(np.all(np.diff(seq) <= 1e-10 * max(1.0, seq[0])))
        at_n, limit = trace_norms(ex.shape, [MnT @ r, ET @ r])
        worst = max(worst, abs(at_n - limit))
    return monotone and worst <= ex.tolerances.check_tol, float(worst)


def _intrinsic_jordan(ex, rng):
    M_inf, E = ex.tail, ex.idempotent
    if M_inf.dim == 0:
        return VACUOUS

    def prod(a, b):
        return intrinsic_jordan(E, a, b, M_inf, tol=ex.tolerances.check_tol)

    worst = 0.0
    one = Element.unit(ex.shape)
    for _ in range(4):
        x, y = M_inf.random_element(rng), M_inf.random_element(rng)
        x2 = prod(x, x)
        scale = norm(x) ** 3 * norm(y)
        worst = max(worst,
                    norm(prod(x2, prod(y, x)) - prod(prod(x2, y), x)) / scale,
                    norm(prod(x, y) - prod(y, x)) / (norm(x) * norm(y)),
                    norm(prod(x, one) - x) / norm(x))
    return worst <= STRICT_TOL, float(worst)


def _embedding_conditions(ex, rng):
    diag = ex.embedding
    return diag.all_hold and diag.consistent, max(diag.isometry_residual,
                                                  -diag.cone_min_eigenvalue,
                                                  diag.dual_norm_residual)


def _containment_chain(ex, rng):
    tol = ex.tolerances.check_tol
    ok = (ex.core.is_subspace_of(ex.b_phi, tol) and ex.b_phi.is_subspace_of(ex.definite, tol)
          and ex.core.is_subspace_of(ex.tail, tol))
    residual = max([ex.b_phi.residual(q) for q in ex.core.coords.T]
                   + [ex.definite.residual(q) for q in ex.b_phi.coords.T]
                   + [ex.tail.residual(q) for q in ex.core.coords.T], default=0.0)
    return ok, float(residual)


def _jordan_closed_tail(ex, rng):
    if not ex.core_report.m_inf_jordan_closed:
        return VACUOUS
    return ex.core_report.core_equals_tail, float(abs(ex.core.dim - ex.tail.dim))


def _faithful_core_is_largest_jordan(ex, rng):
    if not ex.faithful_map:
        return VACUOUS
    largest = ex.core_report.largest_jordan_in_tail
    ok = ex.core.equals(largest, ex.tolerances.check_tol)
    if ex.shape.is_commutative and hasattr(ex, 'projection_span'):
        ok = ok and ex.projection_span().equals(largest, ex.tolerances.check_tol)
    return ok, float(abs(ex.core.dim - largest.dim))


def _core_multiplicative(ex, rng):
    r = jordan_multiplicativity_residual(ex.phi, ex.core, 8, rng)
    return r <= STRICT_TOL, r


def _definite_set_oracle(ex, rng):
    if ex.definite.dim == 0:
        return VACUOUS
    worst = 0.0
    for _ in range(8):
        x = ex.definite.random_element(rng)
        worst = max(worst, norm(schwarz_defect(ex.phi, x)) / (1 + norm(x) ** 2))
    return worst <= STRICT_TOL, float(worst)


def _faithful_idempotent_closed(ex, rng):
    if not ex.decay_condition:
        return VACUOUS
    return ex.core_report.m_inf_jordan_closed, float('nan')


def _invariant_state(ex, rng):
    rho = ex.invariant_state
    r = rho.coords
    residual = float(np.linalg.norm(ex.phi.sa_matrix.T @ r - r))
    return rho.is_state(STRICT_TOL) and residual <= STRICT_TOL, residual


def _decay_monotone(ex, rng):
    records = ex.state_report.decay_records
    ok = all(rec.monotone for rec in records)
    worst = max([float(np.diff(rec.sequence).max(initial=0.0)) for rec in records], default=0.0)
    return ok, worst


def _remainder_decay(ex, rng):
    records = ex.state_report.decay_records
    return (all(rec.remainder_decays for rec in records),
            max([rec.remainder for rec in records], default=0.0))


def _complement_decay_iff_core(ex, rng):
    return (ex.state_report.complement_vanishes == ex.core_report.core_equals_tail,
            max([rec.converged_to for rec in ex.state_report.decay_records], default=0.0))


def _faithful_core_and_decay(ex, rng):
    result = core_tail_criterion(ex.phi, ex.core, ex.tail, ex.state_report.decay_records,
                                 ex.tolerances.check_tol)
    return result["holds"], result["multiplicativity_residual"]


def _faithful_state_chain(ex, rng):
    ok = True
    if ex.state_report.faithful_exists:
        ok = ex.decay_condition
    if ex.decay_condition:
        ok = ok and ex.core_report.core_equals_tail
    return ok, float('nan')


def _faithful_on_generated(ex, rng):
    return (ex.core_report.core_equals_tail == ex.state_report.faithful_on_jordan_generated,
            float('nan'))


PROPERTY_CHECKS = [
    ('unital', _unital),
    ('kadison_schwarz', _kadison_schwarz),
    ('power_consistency', _power_consistency),
    ('adjoint_duality', _adjoint_duality),
    ('stochastic_faithful_oracle', _stochastic_faithful_oracle),
    ('idempotent_commuting_unital', _idempotent),
    ('decay_on_kernel', _decay_on_kernel),
    ('oracle_agreement', _oracle_agreement),
    ('tail_isometry', _tail_isometry),
    ('dual_norm_identity', _dual_norm_identity),
    ('intrinsic_jordan_identity', _intrinsic_jordan),
    ('embedding_conditions', _embedding_conditions),
    ('containment_chain', _containment_chain),
    ('jordan_closed_tail_is_core', _jordan_closed_tail),
    ('faithful_core_is_largest_jordan', _faithful_core_is_largest_jordan),
    ('core_multiplicative', _core_multiplicative),
    ('definite_set_oracle', _definite_set_oracle),
    ('faithful_idempotent_closed_tail', _faithful_idempotent_closed),
    ('invariant_state', _invariant_state),
    ('decay_monotone', _decay_monotone),
    ('remainder_decay', _remainder_decay),
    ('complement_decay_iff_core_is_tail', _complement_decay_iff_core),
    ('faithful_core_and_decay_give_tail', _faithful_core_and_decay),
    ('faithful_state_chain', _faithful_state_chain),
    ('faithful_on_generated_iff_core_is_tail', _faithful_on_generated),
]


def check_explainer(ex, seed=0):
    """run every property check on an explainer, one row per property"""
    rows = []
    for name, check in PROPERTY_CHECKS:
        rng = np.random.default_rng([seed, len(rows)])
        passed, residual = check(ex, rng)
        rows.append((name, bool(passed), float(residual)))
    return pd.DataFrame(rows, columns=['property', 'passed', 'residual'])


def check_instance(phi, tolerances=None, seed=0):
    """Analyse phi and run all property checks on it.

    Returns:
        pd.DataFrame with columns property, passed, residual
    """
    from .explainers import make_explainer
    return check_explainer(make_explainer(phi, tolerances=tolerances, seed=seed), seed)


def suite_tolerances(phi, tolerances=None):
    """tolerances with n_max stretched to the decay horizon of phi, so that
    slowly decaying instances still converge within the norm sequence"""
    from .explainers import Tolerances
    t = Tolerances() if tolerances is None else tolerances
    horizon = decay_horizon(decay_radius(phi, t.eps_per), dim=phi.D)
    return replace(t, n_max=max(t.n_max, min(horizon, N_MAX_CAP)))


def check_generated(phi, suite, seed, tolerances=None):
    """Check one generated instance.

    Returns:
        dict with suite, seed, status ('checked', 'skipped' or 'error'),
        reason, checks (DataFrame or None) and the replayable instance document
    """
    outcome = dict(suite=suite, seed=seed, status='checked', reason=None, checks=None,
                   instance=map_to_document(phi, seed))
    try:
        outcome['checks'] = check_instance(phi, suite_tolerances(phi, tolerances), seed)
    except NumericalToleranceError as e:
        outcome['status'] = 'skipped' if e.code in SKIPPABLE_CODES else 'error'
        outcome['reason'] = str(e)
    return outcome


def _run_instance(args):
    suite, seed, max_dim, tolerances = args
    return check_generated(generate_instance(suite, seed, max_dim), suite, seed, tolerances)


@dataclass
class SuiteResult:
    """all per-instance property rows of a verify run"""
    results: pd.DataFrame
    skipped: List[dict] = field(default_factory=list)
    instances: dict = field(default_factory=dict)
    errors: List[dict] = field(default_factory=list)

    @property
    def failures(self):
        return self.results[~self.results.passed]

    @property
    def passed(self):
        return len(self.failures) == 0

    def summary_df(self):
        """pass/fail matrix: one row per (suite, property) with the worst residual"""
        if self.results.empty:
            return pd.DataFrame(columns=['suite', 'property', 'passed', 'failed', 'worst_residual'])
        grouped = self.results.groupby(['suite', 'property'], sort=False)
        return pd.DataFrame(dict(
            passed=grouped.passed.sum(),
            failed=grouped.passed.apply(lambda s: int((~s).sum())),
            worst_residual=grouped.residual.max(),
        )).reset_index()

    def skipped_df(self):
        """instances whose analysis hit an ambiguous tolerance decision"""
        return pd.DataFrame(self.skipped, columns=['suite', 'seed', 'reason'])

    def errors_df(self):
        return pd.DataFrame(self.errors, columns=['suite', 'seed', 'reason'])

    def failed_instances(self):
        """replayable input documents of the failing instances"""
        keys = sorted(set(zip(self.failures.suite, self.failures.seed)))
        return [self.instances[k] for k in keys]

    def to_json(self):
        summary = self.summary_df()
        return {
            "passed": self.passed,
            "instances": int(self.results.seed.nunique()) if not self.results.empty else 0,
            "skipped": self.skipped,
            "errors": self.errors,
            "summary": [
                {"suite": r.suite, "property": r.property, "passed": int(r.passed),
                 "failed": int(r.failed),
                 "worst_residual": None if np.isnan(r.worst_residual) else float(r.worst_residual)}
                for r in summary.itertuples()],
            "failures": [
                {"suite": r.suite, "seed": int(r.seed), "property": r.property,
                 "residual": None if np.isnan(r.residual) else float(r.residual),
                 "instance": self.instances[(r.suite, r.seed)]}
                for r in self.failures.itertuples()],
        }


def run_suite(suite, count=10, seed=0, max_dim=None, tolerances=None, workers=1):
    """Generate `count` seeded instances per suite and check every property.

    Instances whose analysis hits an ambiguous rank or spectral gap decision
    are reported as skipped. Any other NumericalToleranceError (a norm sequence
    that did not converge, an iteration that did not stabilize, ...) fails the
    instance with an 'analysis' row.

    Args:
        suite(str): 'commutative', 'cp', 'positive_mix' or 'all'
        count(int): instances per suite
        seed(int): master seed
        max_dim(int): largest ambient size, suite default if None
        tolerances(Tolerances): analysis tolerances
        workers(int): size of the process pool, 1 runs inline

    Returns:
        SuiteResult
    """
    suites = SUITES if suite == 'all' else [suite]
    jobs = [(s, instance_seed(seed, i), max_dim, tolerances)
            for s in suites for i in range(count)]
    log.info(f"Calculating {len(jobs)} instances...")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_instance, jobs))
    else:
        outcomes = [_run_instance(job) for job in jobs]
    outcomes.sort(key=lambda o: (suites.index(o['suite']), o['seed']))

    frames, skipped, errors, instances = [], [], [], {}
    for o in outcomes:
        instances[(o['suite'], o['seed'])] = o['instance']
        if o['status'] == 'skipped':
            log.warning(f"{o['suite']} instance {o['seed']} skipped: {o['reason']}")
            skipped.append(dict(suite=o['suite'], seed=o['seed'], reason=o['reason']))
            continue
        if o['status'] == 'error':
            log.error(f"{o['suite']} instance {o['seed']} failed: {o['reason']}")
            errors.append(dict(suite=o['suite'], seed=o['seed'], reason=o['reason']))
            o['checks'] = pd.DataFrame([('analysis', False, float('nan'))],
                                       columns=['property', 'passed', 'residual'])
        frames.append(o['checks'].assign(suite=o['suite'], seed=o['seed']))
    results = (pd.concat(frames, ignore_index=True) if frames else
               pd.DataFrame(columns=['property', 'passed', 'residual', 'suite', 'seed']))
    results = results[['suite', 'seed', 'property', 'passed', 'residual']]
    return SuiteResult(results, skipped, instances, errors)
