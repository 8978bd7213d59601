"""The acceptance suite: ten criteria, each yielding pass/fail records.

Criteria run on the standard catalog with fixed seeds so that two runs of the
suite produce byte-identical record sets (the determinism criterion serializes
and compares two full passes).
"""
from __future__ import annotations

import math

import numpy as np

from . import catalog as cat
from .curves import (closure_detect, curve_to_immersion, integrate_self_shrinker_curve,
                     integrate_xi_curve)
from .functionals import (VariationFamily, bump_window, default_nodes,
                          first_variation, first_variation_fd, h_field,
                          random_compact_normal_field, scale_field,
                          second_variation, second_variation_fd, vp_project,
                          weighted_volume)
from .geometry import NormalField, ScalarField, geometry_jet
from .hermite import gauss_weight, hermite_eval, multi_indices, ou_eigen_defect
from .operators import q_weak, weighted_pair_bundle
from .quadrature import QuadratureGrid, measured_grid, verification_grid
from .reporting import CheckRecord, record
from .soliton import (XiData, modified_mcv_parallelism_check, xi_data_for,
                      xi_residual)
from .stability import (SpectralProblem, galerkin_spectrum, galerkin_sphere_index,
                        hermite_bundle_basis, hermite_scalar_basis,
                        instability_witness, integration_by_parts_gap_bundle,
                        integration_by_parts_gap_scalar, cutoff_identity_gap,
                        product_rule_defect, height_identities, position_field,
                        sphere_index)

SEED = 20240817


def _label(item: cat.CatalogImmersion) -> str:
    ps = ",".join(f"{k}={v:g}" if isinstance(v, (int, float)) else f"{k}={v}"
                  for k, v in item.params.items() if not isinstance(v, (dict, list)))
    return f"{item.family}({ps})" if ps else item.family


def criterion_1() -> list[CheckRecord]:
    """Soliton certification of the catalog; off-center sphere must fail."""
    out = []
    for item in cat.standard_catalog():
        res = xi_residual(item.immersion)
        out.append(record(f"1. residual {_label(item)}", res.dperp_sup, 1e-8))
    off = cat.make_offset_sphere(2, 1.0, (0.5, 0.0, 0.0))
    res = xi_residual(off)
    out.append(record("1. off-center sphere fails", res.dperp_sup, None,
                      passed=res.dperp_sup > 1e-2,
                      detail="residual must exceed 1e-2"))
    return out


def criterion_2() -> list[CheckRecord]:
    """Two-sided conformal-parallelism identity on the catalog and the ellipse."""
    out = []
    for item in cat.standard_catalog():
        gap = modified_mcv_parallelism_check(item.immersion)
        out.append(record(f"2. identity {_label(item)}", gap.discrepancy, 1e-5))
    gap = modified_mcv_parallelism_check(cat.make_ellipse(2.0, 1.0))
    out.append(record("2. identity ellipse", gap.discrepancy, 1e-5,
                      detail=f"both sides nonzero (sup {gap.rhs_sup:.3e})"))
    return out


def criterion_3() -> list[CheckRecord]:
    """Criticality and first-order analytic/differenced agreement."""
    rng = np.random.default_rng(SEED)
    out = []
    for item in cat.standard_catalog():
        imm = item.immersion
        xi = xi_data_for(item)
        mg = measured_grid(imm, default_nodes(imm))
        volume = mg.integrate(xi.weight(mg.points))
        worst_analytic = 0.0
        worst_gap = 0.0
        for _ in range(20):
            eta = random_compact_normal_field(item, rng)
            fv = first_variation(imm, xi, eta, mg, normal=True)
            fd = first_variation_fd(imm, xi, VariationFamily(imm, eta), mg)
            worst_analytic = max(worst_analytic, abs(fv.v))
            worst_gap = max(worst_gap, abs(fv.v - fd) / max(1.0, abs(fd)))
        out.append(record(f"3. criticality {_label(item)}", worst_analytic,
                          1e-8 * volume, detail="|V'(0)| <= 1e-8 V over 20 fields"))
        out.append(record(f"3. fd agreement {_label(item)}", worst_gap, 1e-5,
                          detail="|analytic - fd| / max(1, |fd|)"))
    return out


def criterion_4() -> list[CheckRecord]:
    """Second variation: differenced twin and the radial-sphere anchor."""
    rng = np.random.default_rng(SEED + 1)
    out = []
    cases = [cat.make_plane(1, 1, offset=(0.0, 1.0)), cat.make_plane(2, 1),
             cat.make_sphere(1, 1.0), cat.make_sphere(2, 1.0)]
    for item in cases:
        imm = item.immersion
        xi = xi_data_for(item)
        mg = measured_grid(imm, default_nodes(imm))
        worst = 0.0
        for _ in range(10):
            eta = random_compact_normal_field(item, rng)
            q = second_variation(imm, xi, eta, mg)
            qfd = second_variation_fd(imm, xi, VariationFamily(imm, eta), mg)
            worst = max(worst, abs(q - qfd) / max(1.0, abs(qfd)))
        out.append(record(f"4. Q vs fd {_label(item)}", worst, 1e-4))
    for m in (1, 2):
        item = cat.make_sphere(m, 1.0)
        xi = xi_data_for(item)
        vr = weighted_volume(item.immersion, xi)
        q = second_variation(item.immersion, xi, position_field(item), vr.mg)
        anchor = -(m + 1.0) * vr.v
        rel = abs(q - anchor) / abs(anchor)
        out.append(record(f"4. radial anchor S{m}(1)", rel, 1e-6,
                          detail=f"Q = {q:.12g}, -(m+r^2)V = {anchor:.12g}"))
    return out


def criterion_5() -> list[CheckRecord]:
    """Operator identities: product rule, parts, cutoff, height functions."""
    rng = np.random.default_rng(SEED + 2)
    out = []
    sphere = cat.make_sphere(2, 1.0)
    cylinder = cat.make_product(cat.make_sphere(1, 1.0), cat.make_plane(1, 1))
    plane = cat.make_plane(2, 1)

    # Product rule (bundle Leibniz for L).
    for item in (sphere, cylinder):
        xi = xi_data_for(item)
        grid = verification_grid(item.immersion.box, 6)
        c = rng.normal(size=item.immersion.ambient_dim)
        phi = ScalarField(lambda U, c0=float(c[0]): np.sin(U[:, 0]) + c0 * np.cos(U[:, 1]))
        eta = item.parallel_normal_basis[0]
        defect = product_rule_defect(xi, phi, eta, grid)
        out.append(record(f"5. product rule {_label(item)}", defect, 1e-6))
    xi_p = xi_data_for(plane)
    bump = bump_window(np.zeros(2), 3.0, 6.0)
    eta_p = scale_field(bump, plane.parallel_normal_basis[0])
    defect = product_rule_defect(xi_p, ScalarField(lambda U: U[:, 0]), eta_p,
                                 verification_grid(plane.immersion.box, 8))
    out.append(record("5. product rule plane", defect, 1e-6))

    # Integration by parts, bundle and scalar.
    mgp = measured_grid(plane.immersion, default_nodes(plane.immersion))
    gap = integration_by_parts_gap_bundle(xi_p, eta_p, eta_p, mgp)
    out.append(record("5. parts bundle plane", gap, 1e-6))
    xi_s = xi_data_for(sphere)
    mgs = measured_grid(sphere.immersion, default_nodes(sphere.immersion))
    gap = integration_by_parts_gap_bundle(
        xi_s, sphere.parallel_normal_basis[0],
        random_compact_normal_field(sphere, rng), mgs)
    out.append(record("5. parts bundle sphere", gap, 1e-6))
    phi1 = ScalarField(bump.value, bump.grad, bump.hess)
    gap = integration_by_parts_gap_scalar(xi_p, phi1, phi1, mgp)
    out.append(record("5. parts scalar plane", gap, 1e-6))

    # Cutoff identity.
    for item, mg in ((plane, mgp), (sphere, mgs)):
        xi = xi_data_for(item)
        eta = random_compact_normal_field(item, rng)
        phi = (bump if not item.compact
               else ScalarField(lambda U: 1.0 + 0.3 * np.sin(U[:, 0]) * np.cos(U[:, 1]),
                                name="smooth"))
        gap = cutoff_identity_gap(xi, phi, eta, mg)
        out.append(record(f"5. cutoff identity {_label(item)}", gap, 1e-6))

    # Height identities and condition (A).
    for item in (plane, sphere, cylinder):
        v = rng.normal(size=item.immersion.ambient_dim)
        hi = height_identities(item, v)
        out.append(record(f"5. height identity {_label(item)}",
                          max(hi.vn_defect, hi.lvbot_defect), 1e-6,
                          detail=f"condition (A) sup = {hi.condition_a_sup:.2e}"))
    return out


def criterion_6() -> list[CheckRecord]:
    """Hermite apparatus: eigen-identity, orthogonality, plane spectra."""
    out = []
    worst = 0.0
    for m in (1, 2, 3):
        grid = QuadratureGrid.build(
            cat.Box.build(-6.0 * np.ones(m), 6.0 * np.ones(m)), 12).points
        for idx in multi_indices(m, 6):
            worst = max(worst, ou_eigen_defect(idx, grid))
    out.append(record("6. drift-Laplacian eigen-identity (deg <= 6, m <= 3)",
                      worst, 1e-9))

    worst_ortho = 0.0
    for m in (1, 2, 3):
        nodes = {1: 96, 2: 48, 3: 32}[m]
        grid = QuadratureGrid.build(
            cat.Box.build(-9.0 * np.ones(m), 9.0 * np.ones(m)), nodes)
        w = gauss_weight(grid.points) * grid.weights
        vals = np.stack([hermite_eval(idx, grid.points)
                         for idx in multi_indices(m, 6)])
        gram = np.einsum("aN,bN,N->ab", vals, vals, w)
        norms = np.sqrt(np.diag(gram))
        off = gram / np.outer(norms, norms) - np.eye(len(norms))
        worst_ortho = max(worst_ortho, float(np.abs(off).max()))
    out.append(record("6. weighted orthogonality (deg <= 6, m <= 3)",
                      worst_ortho, 1e-8))

    for m, degree in ((1, 5), (2, 5)):
        item = cat.make_plane(m, 1)
        xi = xi_data_for(item)
        fields, labels = hermite_scalar_basis(item, degree)
        mg = measured_grid(item.immersion, default_nodes(item.immersion))
        res = galerkin_spectrum(SpectralProblem(xi=xi, fields=fields, mg=mg,
                                                mode="scalar", labels=labels))
        expect = np.sort(np.array([idx.degree - 1.0
                                   for idx in multi_indices(m, degree)]))
        gap = float(np.abs(np.sort(res.values) - expect).max())
        out.append(record(f"6. plane spectrum P{m} (-Lt)", gap, 1e-6,
                          detail="eigenvalues n - 1 with simplex multiplicities"))
    return out


def criterion_7() -> list[CheckRecord]:
    """W-stability of planes after VP projection; instability without it."""
    out = []
    for m in (1, 2):
        item = cat.make_plane(m, 1)
        xi = xi_data_for(item)
        fields, labels = hermite_bundle_basis(item, 8)
        mg = measured_grid(item.immersion, default_nodes(item.immersion))
        worst = -np.inf
        for fld in fields:
            proj = vp_project(xi, fld, item.parallel_normal_basis, mg)
            q = q_weak(xi, proj, proj, mg)
            nsq = weighted_pair_bundle(xi, fld, fld, mg)
            worst = max(worst, -q / max(nsq, 1e-300))
        out.append(record(f"7. W-stability P{m} (deg <= 8)", worst, 1e-8,
                          detail="max of -Q(vp eta)/|eta|_w^2 over the basis"))
    w = instability_witness("plane_cutoff", m=2, p=1, R=10.0)
    out.append(record("7. unprojected constant normal unstable", w.q, None,
                      passed=w.q < 0,
                      detail=f"Q = {w.q:.6g} at cutoff R = 10"))
    return out


def criterion_8() -> list[CheckRecord]:
    """Closed-form index vs Galerkin count; the r^2 <= m law where it applies."""
    out = []
    for m in (1, 2):
        for r in cat.SPHERE_RADII:
            for p in (1, 2):
                closed = sphere_index(m, p, r, vp=True)
                gal, _ = galerkin_sphere_index(m, p, r, vp=True)
                out.append(record(
                    f"8. index match m={m} p={p} r={r:g}",
                    float(abs(closed.index - gal)), 0.0,
                    passed=closed.index == gal,
                    detail=f"closed {closed.index}, galerkin {gal}"))
                cutoff = m if p >= 2 else m + 2
                law = (closed.index == m + 1) == (r * r <= cutoff + 1e-12)
                note = ("index = m+1 iff r^2 <= m" if p >= 2 else
                        "codim-1 sharp form: index = m+1 iff r^2 <= m+2")
                out.append(record(
                    f"8. index law m={m} p={p} r={r:g}",
                    float(closed.index), None, passed=law, detail=note))
    return out


def criterion_9() -> list[CheckRecord]:
    """Curve conservation, circle closure, trajectory-as-immersion residual."""
    rng = np.random.default_rng(SEED + 3)
    out = []
    worst = 0.0
    for _ in range(50):
        c = float(rng.uniform(0.1, 1.0) * rng.choice([-1.0, 1.0]))
        r0 = rng.uniform(0.2, 1.2)
        ang = rng.uniform(0, 2 * math.pi)
        x0 = (r0 * math.cos(ang), r0 * math.sin(ang))
        th0 = float(rng.uniform(0, 2 * math.pi))
        traj = integrate_xi_curve(x0, th0, c, 15.0)
        worst = max(worst, traj.drift)
    out.append(record("9. first-integral drift (50-run sweep)", worst, 1e-8))

    circle = integrate_self_shrinker_curve((1.0, 0.0), math.pi / 2, 2 * math.pi + 0.05)
    verdict = closure_detect(circle, tol=1e-6)
    out.append(record("9. unit circle closes", verdict.gap, 1e-8,
                      passed=verdict.closed and verdict.gap <= 1e-8,
                      detail=f"period {verdict.period}"))
    rot_ok = verdict.rotation_number is not None and \
        abs(verdict.rotation_number - 1.0) <= 1e-6
    out.append(record("9. rotation number one",
                      verdict.rotation_number, None, passed=rot_ok))

    traj = integrate_xi_curve((1.0, 0.0), math.pi / 2, 0.3, 20.0)
    imm = curve_to_immersion(traj)
    res = xi_residual(imm, nodes_per_axis=48)
    out.append(record("9. sampled trajectory residual", res.dperp_sup, 1e-6))
    return out


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9]


def run_core() -> list[CheckRecord]:
    records = []
    for fn in CRITERIA:
        records.extend(fn())
    return records


def run_acceptance(include_determinism: bool = True) -> list[CheckRecord]:
    """Criteria 1-9, plus the determinism criterion (a full second pass whose
    serialized records must match the first byte for byte)."""
    from .reporting import records_json
    records = run_core()
    if include_determinism:
        again = run_core()
        identical = records_json(records) == records_json(again)
        records.append(record("10. determinism of the full suite",
                              None, None, passed=identical,
                              detail="two passes serialize identically"))
    return records
