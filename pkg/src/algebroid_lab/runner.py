"""Check execution and report emission for scenarios.

Checks run in declaration order; an exception inside one check becomes a
status="error" report and the suite continues.  Exit codes: 0 when every
check passes, 1 when any fails or is inconclusive, 2 when any errored.

The JSON report is deterministic byte-for-byte for a fixed scenario and
seed; wall-clock times are therefore zeroed in the JSON unless timings
are explicitly requested (the text rendering always shows them).
"""

from __future__ import annotations

import json

import numpy as np

from . import action as action_mod
from . import algebroid as algebroid_mod
from . import apath as apath_mod
from . import dirac as dirac_mod
from .errors import AlgebroidLabError
from .report import ERROR, FAIL, INCONCLUSIVE, PASS, CheckReport, Stopwatch
from .scenario import ODE_KINDS, Scenario


def run_checks(sc: Scenario, overrides=None) -> tuple[list[CheckReport], int]:
    """Execute all checks; returns (reports, exit_code)."""
    overrides = overrides or {}
    reports = []
    for spec in sc.checks:
        defaults = sc.defaults
        tol_default = overrides.get(
            "tolerance", defaults["ode_tolerance" if spec.kind in ODE_KINDS
                                  else "tolerance"])
        tol = float(spec.params.get("tolerance", tol_default))
        samples = int(spec.params.get(
            "samples", overrides.get("samples", defaults["samples"])))
        seed = int(spec.params.get(
            "seed", overrides.get("seed", defaults["seed"])))
        try:
            with Stopwatch() as sw:
                report = _dispatch(sc, spec.kind, spec.params, tol,
                                   samples, seed, defaults)
            report.ms = sw.elapsed * 1e3
        except AlgebroidLabError as err:
            report = CheckReport(
                check_id=spec.check_id, kind=spec.kind, status=ERROR,
                residual=float("nan"), tolerance=tol,
                details={"error": f"{type(err).__name__}: {err}"})
        report.with_id(spec.check_id)
        report.kind = spec.kind
        reports.append(report)
    statuses = {r.status for r in reports}
    if ERROR in statuses:
        code = 2
    elif FAIL in statuses or INCONCLUSIVE in statuses:
        code = 1
    else:
        code = 0
    return reports, code


def _dispatch(sc, kind, p, tol, samples, seed, defaults) -> CheckReport:
    if kind == "algebroid_axioms":
        return algebroid_mod.check_algebroid_axioms(
            p["target"], tol, samples, seed)

    if kind == "morphism":
        return algebroid_mod.check_morphism(p["target"], tol, samples, seed)

    if kind == "pullback_fiber":
        basis = algebroid_mod.pullback_fiber(
            p["algebroid"], p["map"], p["at"], tol)
        return _basis_report("pullback_fiber", basis, p, tol,
                             p["algebroid"], p["map"], p["at"])

    if kind == "fibered_product":
        pt = p["at"]
        basis = algebroid_mod.fibered_product_fiber(
            p["m1"], p["m2"], pt[0], pt[1], tol)
        dim = basis.shape[1]
        expected = p.get("expect_dim")
        ok = expected is None or dim == int(expected)
        return CheckReport(
            "fibered_product", "fibered_product",
            PASS if ok else FAIL, 0.0 if ok else 1.0, tol,
            details={"dimension": int(dim)})

    if kind == "dirac":
        return dirac_mod.check_dirac(p["target"], tol, samples, seed)

    if kind == "gauge":
        res = dirac_mod.gauge_transform(p["target"], p["two_form"],
                                        tol, samples, seed)
        inner = dirac_mod.check_dirac(res.model, tol, samples, seed)
        ok = res.b_closed and inner.ok
        return CheckReport(
            "gauge", "gauge", PASS if ok else FAIL,
            max(res.closedness_residual, inner.residual), tol,
            worst_point=inner.worst_point,
            details={"b_closed": res.b_closed,
                     "closedness_residual": res.closedness_residual,
                     "transformed_dirac": inner.status})

    if kind == "dirac_map":
        return dirac_mod.check_dirac_map(
            p["target"], p.get("mode", "forward"), tol, samples, seed)

    if kind == "induced_action":
        dm = p["target"]
        strong = dirac_mod.check_dirac_map(dm, "strong", tol, samples, seed)
        if not strong.ok:
            strong.status = FAIL
            strong.details["note"] = "strong certification failed"
            return strong
        act = dirac_mod.induced_dirac_action(
            dm, tol, samples, seed, horizon=defaults["horizon"])
        inner = action_mod.check_action(act, tol, samples, seed)
        inner.details["strong_map"] = strong.status
        return inner

    if kind == "action":
        return action_mod.check_action(p["target"], tol, samples, seed)

    if kind == "module":
        return action_mod.check_module(p["target"], tol, samples, seed)

    if kind == "unique_lift":
        act = action_mod.unique_lift_action(
            p["algebroid"], p["map"], tol, samples, seed,
            horizon=defaults["horizon"])
        return action_mod.check_action(act, tol, samples, seed)

    if kind == "leaf_action":
        return action_mod.leaf_action_check(
            p["action"], p["quotient"], tol, samples, seed)

    if kind == "quasi_equivalence":
        return action_mod.check_quasi_equivalence(
            p["target"], tol, samples, seed)

    if kind == "strong_morita":
        return action_mod.check_strong_morita(p["target"], tol, samples, seed)

    if kind == "tensor_distribution":
        x, y = p["at"]
        basis, report = action_mod.tensor_distribution(
            p["right"], p["left"], x, y, tol, samples, seed)
        expected = p.get("expect_dim")
        if expected is not None \
                and report.details["dimension"] != int(expected):
            report.status = FAIL
            report.details["expected_dimension"] = int(expected)
        return report

    if kind == "apath_valid":
        return apath_mod.validate_apath(p["target"], tol, samples)

    if kind == "apath_integrate":
        cfg = apath_mod.IntegratorConfig(
            step=float(p.get("step", defaults["step"])), max_error=tol)
        valid = apath_mod.validate_apath(
            p["path"], max(tol, defaults["tolerance"]), samples)
        if not valid.ok:
            valid.details["note"] = "path failed validation"
            return valid
        traj = apath_mod.integrate_apath(p["path"], p["action"],
                                         np.asarray(p["start"], float), cfg)
        residual = max(traj.base_tracking_residual, traj.error_estimate)
        details = {"endpoint": [float(v) for v in traj.endpoint],
                   "base_tracking": traj.base_tracking_residual,
                   "error_estimate": traj.error_estimate}
        if "endpoint" in p:
            gap = float(np.max(np.abs(
                traj.endpoint - np.asarray(p["endpoint"], float))))
            details["endpoint_gap"] = gap
            residual = max(residual, gap)
        if "dump" in p:
            traj.dump(p["dump"], stride=int(p.get("dump_stride", 1)))
        status = PASS if residual < tol else FAIL
        return CheckReport("apath_integrate", "apath_integrate", status,
                           residual, tol, details=details)

    if kind == "transport_invariances":
        cfg = apath_mod.IntegratorConfig(
            step=float(p.get("step", defaults["step"])), max_error=tol)
        return apath_mod.check_transport_invariances(
            p["path"], p["action"], np.asarray(p["start"], float), cfg,
            witness=p.get("witness"))

    if kind == "psi_transport":
        cfg = apath_mod.IntegratorConfig(
            step=float(p.get("step", defaults["step"])), max_error=tol)
        pair = p["pair"]
        endpoint, report = apath_mod.psi_transport(
            p["witness"], p["module"], p["path"],
            (np.asarray(pair[0], float), np.asarray(pair[1], float)),
            np.asarray(p["start"], float), cfg)
        report.details["endpoint"] = [float(v) for v in endpoint]
        if "endpoint" in p:
            gap = float(np.max(np.abs(
                endpoint - np.asarray(p["endpoint"], float))))
            report.details["endpoint_gap"] = gap
            if gap >= report.tolerance:
                report.status = FAIL
                report.residual = max(report.residual, gap)
        return report

    raise AssertionError(f"unhandled check kind {kind}")


def _basis_report(kind, basis, p, tol, A, f, x):
    """Report for a pullback-fiber basis: dimension plus the defining
    residual |df(V) - rho(a)| over the returned basis columns."""
    J = f.jacobian_at(x)
    R = A.anchor_matrix_at(f.eval(x))
    worst = 0.0
    for k in range(basis.shape[1]):
        V = basis[:f.source.dim, k]
        al = basis[f.source.dim:, k]
        worst = max(worst, float(np.max(np.abs(J @ V - R @ al),
                                        initial=0.0)))
    expected = p.get("expect_dim")
    ok = worst < tol and (expected is None
                          or basis.shape[1] == int(expected))
    return CheckReport(kind, kind, PASS if ok else FAIL, worst, tol,
                       details={"dimension": int(basis.shape[1])})


# ---------------------------------------------------------------------------
# report emission


def report_json(sc: Scenario, reports, timings=False) -> str:
    payload = {
        "scenario": sc.name,
        "reports": [
            {
                "id": r.check_id,
                "kind": r.kind,
                "status": r.status,
                "residual": _finite_or_none(r.residual),
                "worst_point": list(r.worst_point)
                if r.worst_point is not None else None,
                "ms": round(r.ms, 3) if timings else 0,
            }
            for r in reports
        ],
    }
    return json.dumps(payload, indent=2) + "\n"


def _finite_or_none(v):
    return float(v) if np.isfinite(v) else None


def report_text(sc: Scenario, reports) -> str:
    lines = [f"scenario: {sc.name}"]
    width = max((len(r.check_id) for r in reports), default=10)
    for r in reports:
        res = "-" if not np.isfinite(r.residual) else f"{r.residual:.3e}"
        lines.append(
            f"  {r.check_id:<{width}}  {r.status:<12} residual={res:<11} "
            f"tol={r.tolerance:.1e}  {r.ms:8.1f} ms")
        if r.status == ERROR:
            lines.append(f"      {r.details.get('error', '')}")
    counts = {s: sum(1 for r in reports if r.status == s)
              for s in (PASS, FAIL, INCONCLUSIVE, ERROR)}
    lines.append("  " + ", ".join(f"{v} {k}" for k, v in counts.items()))
    return "\n".join(lines) + "\n"


def parse_report_json(text: str) -> dict:
    """Round-trip helper: parse an emitted report back to its payload."""
    return json.loads(text)
