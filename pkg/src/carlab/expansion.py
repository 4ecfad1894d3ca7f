"""Independent brute-force expander for the weighted pointwise identity.

This module re-derives the identity from scratch, independently of the jet
evaluator in ``identity.py``.  It works over a tiny exact polynomial engine
whose indeterminates are the partial derivatives of the weight exponent l,
of the free function Psi, and of the conjugate pair (v, vbar), treated as
commuting symbols:

    l{j}{k}  = d_x^j d_t^k l      (real)
    P{j}     = d_x^j Psi          (real)
    v{j}{k}, w{j}{k} = d_x^j d_t^k of v and conj(v)

All numeric coefficients in the identity are dyadic rationals, so complex
``float`` coefficients are exact and zero tests are meaningful.

The expander multiplies out the cross term of the two operator halves,
subtracts the published flux/cross/pointwise groups, and mechanically
integrates the residue by parts down to a canonical basis (diagonal
|d_x^m v|^2 slots plus antisymmetric adjacent pairs).  The resulting
correction set is the ground truth against which the jet evaluator is
certified or localized.
"""

from __future__ import annotations

from functools import lru_cache

__all__ = [
    "Poly",
    "sym_l",
    "sym_psi",
    "sym_v",
    "sym_w",
    "poly_dx",
    "poly_dt",
    "poly_conj",
    "printed_groups",
    "defect_poly",
    "defect_corrections",
    "evaluate_poly",
    "env_from_jets",
    "defect_value",
    "correction_report",
]

# ---------------------------------------------------------------------------
# polynomial engine: Poly = dict[monomial, complex], monomial = sorted tuple
# of (symbol, power) pairs; symbols are short strings.
# ---------------------------------------------------------------------------

Poly = dict


def sym_l(j, k):
    return f"l{j}{k}"


def sym_psi(j):
    return f"P{j}"


def sym_v(j, k):
    return f"v{j}{k}"


def sym_w(j, k):
    return f"w{j}{k}"


def p_const(c) -> Poly:
    return {(): complex(c)} if c != 0 else {}


def p_sym(s) -> Poly:
    return {((s, 1),): 1.0 + 0.0j}


def p_add(*polys) -> Poly:
    out = {}
    for p in polys:
        for m, c in p.items():
            nc = out.get(m, 0.0) + c
            if nc == 0:
                out.pop(m, None)
            else:
                out[m] = nc
    return out


def p_scale(p: Poly, c) -> Poly:
    if c == 0:
        return {}
    return {m: cc * c for m, cc in p.items()}


def p_sub(a: Poly, b: Poly) -> Poly:
    return p_add(a, p_scale(b, -1.0))


def _mono_mul(m1, m2):
    d = dict(m1)
    for s, e in m2:
        d[s] = d.get(s, 0) + e
    return tuple(sorted(d.items()))


def p_mul(a: Poly, b: Poly) -> Poly:
    out = {}
    for m1, c1 in a.items():
        for m2, c2 in b.items():
            m = _mono_mul(m1, m2)
            nc = out.get(m, 0.0) + c1 * c2
            if nc == 0:
                out.pop(m, None)
            else:
                out[m] = nc
    return out


def _sym_dx(s):
    kind = s[0]
    if kind == "P":
        return f"P{int(s[1:]) + 1}"
    j, k = int(s[1:-1]), int(s[-1])
    return f"{kind}{j + 1}{k}"


def _sym_dt(s):
    kind = s[0]
    if kind == "P":
        return None  # Psi depends on x only
    j, k = int(s[1:-1]), int(s[-1])
    return f"{kind}{j}{k + 1}"


def _poly_deriv(p: Poly, rule) -> Poly:
    out = {}
    for m, c in p.items():
        for idx, (s, e) in enumerate(m):
            ds = rule(s)
            if ds is None:
                continue
            rest = list(m)
            if e == 1:
                rest.pop(idx)
            else:
                rest[idx] = (s, e - 1)
            nm = _mono_mul(tuple(rest), ((ds, 1),))
            nc = out.get(nm, 0.0) + c * e
            if nc == 0:
                out.pop(nm, None)
            else:
                out[nm] = nc
    return out


def poly_dx(p: Poly) -> Poly:
    return _poly_deriv(p, _sym_dx)


def poly_dt(p: Poly) -> Poly:
    return _poly_deriv(p, _sym_dt)


def poly_conj(p: Poly) -> Poly:
    out = {}
    for m, c in p.items():
        nm = []
        for s, e in m:
            if s[0] == "v":
                nm.append(("w" + s[1:], e))
            elif s[0] == "w":
                nm.append(("v" + s[1:], e))
            else:
                nm.append((s, e))
        out[tuple(sorted(nm))] = c.conjugate()
    return out


def evaluate_poly(p: Poly, env) -> complex:
    total = 0.0 + 0.0j
    for m, c in p.items():
        term = c
        for s, e in m:
            term *= env[s] ** e
        total += term
    return total


# ---------------------------------------------------------------------------
# the identity, assembled exactly as printed
# ---------------------------------------------------------------------------

I = 1.0j


def _lp(j, k=0):
    return p_sym(sym_l(j, k))


def _vp(j, k=0):
    return p_sym(sym_v(j, k))


def _wp(j, k=0):
    return p_sym(sym_w(j, k))


def _psi(j=0):
    return p_sym(sym_psi(j))


def _pair_sym(a, b):
    """v^(a) wbar^(b) + v^(b) wbar^(a)."""
    return p_add(p_mul(_vp(*_jk(a)), _wp(*_jk(b))), p_mul(_vp(*_jk(b)), _wp(*_jk(a))))


def _pair_anti(a, b):
    """v^(a) wbar^(b) - v^(b) wbar^(a)."""
    return p_sub(p_mul(_vp(*_jk(a)), _wp(*_jk(b))), p_mul(_vp(*_jk(b)), _wp(*_jk(a))))


def _jk(idx):
    return idx if isinstance(idx, tuple) else (idx, 0)


@lru_cache(maxsize=1)
def coefficient_polys():
    """a0..a3, tilde a0, and the two composite coefficients, as polynomials."""
    lx, lxx, lxxx, lxxxx = _lp(1), _lp(2), _lp(3), _lp(4)
    lx2 = p_mul(lx, lx)
    lx3 = p_mul(lx2, lx)
    lx4 = p_mul(lx2, lx2)
    a0 = p_add(
        lx4,
        p_scale(p_mul(lx2, lxx), -6),
        p_scale(p_mul(lxx, lxx), 3),
        p_scale(p_mul(lx, lxxx), 4),
        p_scale(lxxxx, -1),
    )
    a1 = p_scale(p_add(lx3, p_scale(p_mul(lx, lxx), -3), lxxx), -4)
    a2 = p_scale(p_sub(lx2, lxx), 6)
    a3 = p_scale(lx, -4)
    at0 = p_add(
        lx4,
        p_scale(_psi(), -1),
        p_scale(p_mul(lx, lxxx), -2),
        p_scale(p_mul(lxx, lxx), -3),
    )
    c24 = p_mul(
        p_scale(lx, 4),
        p_add(lx4, p_scale(_psi(), -2), p_scale(p_mul(lx, lxxx), -2), p_scale(p_mul(lxx, lxx), -3)),
    )
    c41 = p_add(
        p_scale(p_mul(lx2, lxx), -6),
        p_scale(p_mul(lx, lxxx), 6),
        p_scale(p_mul(lxx, lxx), 6),
        p_scale(lxxxx, -1),
    )
    return {"a0": a0, "a1": a1, "a2": a2, "a3": a3, "at0": at0, "C24": c24, "C41": c41}


@lru_cache(maxsize=1)
def printed_groups():
    """Every group of the published identity as an expanded polynomial."""
    cf = coefficient_polys()
    a0, a1, a2, a3 = cf["a0"], cf["a1"], cf["a2"], cf["a3"]
    at0, C24, C41 = cf["at0"], cf["C24"], cf["C41"]
    psi = _psi()
    lt, ltx, ltxx, ltxxx, ltt = _lp(0, 1), _lp(1, 1), _lp(2, 1), _lp(3, 1), _lp(0, 2)
    lx, lxx, lxxx, lxxxx = _lp(1), _lp(2), _lp(3), _lp(4)

    v, vx, vxx, vxxx, vxxxx = _vp(0), _vp(1), _vp(2), _vp(3), _vp(4)
    vt, vxt = _vp(0, 1), _vp(1, 1)
    w, wx, wxx, wxxx = _wp(0), _wp(1), _wp(2), _wp(3)
    wt, wxt = _wp(0, 1), _wp(1, 1)

    i1 = p_add(p_scale(vt, I), p_mul(psi, v), p_mul(a2, vxx), vxxxx)
    i2 = p_add(
        p_scale(p_mul(lt, v), -I),
        p_mul(p_sub(a0, psi), v),
        p_mul(a1, vx),
        p_mul(a3, vxxx),
    )
    theta_pu = p_add(i1, i2)

    a0_m_psi = p_sub(a0, psi)
    a3x = poly_dx(a3)
    flux_x = p_add(
        p_scale(p_mul(a3, p_sub(p_mul(vt, wxx), p_mul(wt, vxx))), I),
        p_scale(p_mul(a3, p_sub(p_mul(vxt, wx), p_mul(wxt, vx))), -I / 2),
        p_scale(p_mul(a3x, p_sub(p_mul(vt, wx), p_mul(wt, vx))), I / 2),
        p_scale(p_mul(a3x, _pair_sym(3, 2)), 1.5),
        p_mul(a1, _pair_sym(3, 1)),
        p_mul(C41, _pair_sym(3, 0)),
        p_scale(p_mul(lt, _pair_anti(3, 0)), I),
        p_scale(p_mul(lt, _pair_anti(2, 1)), -I),
        p_mul(p_sub(C24, poly_dx(C41)), _pair_sym(2, 0)),
        p_scale(p_mul(ltx, _pair_anti(2, 0)), -I),
        p_scale(p_mul(p_add(ltxx, p_mul(a2, lt)), _pair_anti(1, 0)), I),
        p_scale(
            p_mul(p_sub(p_scale(a1, 2), poly_dx(poly_dx(a3))),
                  p_sub(p_mul(vt, w), p_mul(wt, v))),
            I / 4,
        ),
        p_mul(
            p_add(
                p_mul(a0_m_psi, a2),
                p_scale(poly_dx(C24), -1),
                p_scale(poly_dx(a1), -1),
                p_scale(poly_dx(poly_dx(C41)), -1),
                p_scale(p_mul(a3x, a0), 1.5),
                p_scale(p_mul(a2, at0), -1),
            ),
            _pair_sym(1, 0),
        ),
        p_mul(a3, p_mul(vxxx, wxxx)),
        p_mul(
            p_add(
                p_mul(a2, a3),
                p_scale(p_mul(a3x, a3), -1.5),
                p_scale(poly_dx(poly_dx(a3)), -1.5),
                p_scale(a1, -1),
            ),
            p_mul(vxx, wxx),
        ),
        p_mul(
            p_add(
                p_mul(a1, a2),
                poly_dx(poly_dx(a1)),
                p_scale(C24, -1),
                p_scale(poly_dx(C41), -2),
                p_scale(p_mul(a3x, a1), 1.5),
            ),
            p_mul(vx, wx),
        ),
        p_mul(
            p_add(
                p_mul(a1, psi),
                poly_dx(poly_dx(C24)),
                p_scale(poly_dx(poly_dx(poly_dx(C41))), -1),
                poly_dx(p_mul(a0_m_psi, a2)),
                p_mul(a1, at0),
                p_scale(
                    poly_dx(poly_dx(p_sub(p_scale(p_mul(a3x, a0), 1.5), p_mul(a2, at0)))),
                    -1,
                ),
            ),
            p_mul(v, w),
        ),
    )

    flux_t = p_add(
        p_scale(p_mul(lt, p_mul(v, w)), -1),
        p_scale(p_mul(a3, p_sub(p_mul(vx, wxx), p_mul(wx, vxx))), -I / 2),
        p_scale(
            p_mul(p_sub(p_scale(a1, 2), poly_dx(poly_dx(a3))),
                  p_sub(p_mul(v, wx), p_mul(w, vx))),
            I / 4,
        ),
    )

    d_coeff = p_scale(
        p_add(
            p_scale(p_mul(p_mul(lx, lx), ltx), 6),
            p_scale(p_mul(p_mul(lx, lxx), lt), 6),
            p_scale(p_mul(lxx, ltx), -6),
            p_scale(p_mul(lx, ltxx), -3),
            p_scale(p_mul(lt, lxxx), -3),
            ltxxx,
        ),
        2 * I,
    )

    vxx_sq_coeff = p_add(
        p_scale(p_mul(p_mul(lx, lx), lxx), 24),
        p_scale(p_mul(lx, lxxx), -24),
        p_scale(p_mul(lxx, lxx), 48),
        p_scale(lxxxx, -20),
    )
    vx_sq_coeff = p_add(
        p_scale(poly_dx(p_mul(a1, a2)), -1),
        p_scale(p_mul(a0_m_psi, a2), -2),
        p_scale(poly_dx(poly_dx(C41)), -4),
        p_scale(poly_dx(C24), 3),
        p_scale(poly_dx(poly_dx(poly_dx(a1))), -1),
        p_scale(poly_dx(p_mul(poly_dx(a3), a1)), -1.5),
        p_scale(p_mul(poly_dx(a3), a0), -3),
        p_scale(p_mul(a2, at0), 2),
    )
    v_sq_coeff = p_add(
        p_scale(p_mul(a0_m_psi, psi), 2),
        p_scale(poly_dx(p_mul(a1, psi)), -1),
        p_scale(p_mul(a0, at0), -2),
        p_scale(poly_dx(poly_dx(poly_dx(C24))), -1),
        poly_dx(poly_dx(p_mul(a0_m_psi, a2))),
        p_scale(poly_dx(p_mul(a1, at0)), -1),
        poly_dx(poly_dx(p_sub(p_scale(p_mul(poly_dx(a3), a0), 1.5), p_mul(a2, at0)))),
        poly_dx(poly_dx(poly_dx(poly_dx(C41)))),
        ltt,
    )

    cross_a0t = p_mul(at0, p_add(p_mul(theta_pu, w), p_mul(poly_conj(theta_pu), v)))
    cross_lxx = p_scale(
        p_mul(lxx, p_add(p_mul(theta_pu, wxx), p_mul(poly_conj(theta_pu), vxx))), 6
    )

    pointwise = p_add(
        p_mul(d_coeff, _pair_anti(0, 1)),
        p_scale(p_mul(p_mul(lt, lxx), _pair_anti(0, 2)), 6 * I),
        p_scale(p_mul(ltx, _pair_anti(2, 1)), 4 * I),
        p_scale(p_mul(lxx, p_mul(vxxx, wxxx)), 16),
        p_mul(vxx_sq_coeff, p_mul(vxx, wxx)),
        p_mul(vx_sq_coeff, p_mul(vx, wx)),
        p_mul(v_sq_coeff, p_mul(v, w)),
    )

    return {
        "I1": i1,
        "I2": i2,
        "theta_pu": theta_pu,
        "flux_x": flux_x,
        "flux_t": flux_t,
        "cross_a0t": cross_a0t,
        "cross_lxx": cross_lxx,
        "pointwise": pointwise,
    }


@lru_cache(maxsize=1)
def defect_poly() -> Poly:
    """cross-term minus all published groups; zero iff the print is exact."""
    g = printed_groups()
    sigma = p_add(
        p_mul(g["I1"], poly_conj(g["I2"])), p_mul(poly_conj(g["I1"]), g["I2"])
    )
    return p_sub(
        sigma,
        p_add(
            poly_dx(g["flux_x"]),
            poly_dt(g["flux_t"]),
            g["cross_a0t"],
            g["cross_lxx"],
            g["pointwise"],
        ),
    )


# ---------------------------------------------------------------------------
# mechanical integration by parts of a purely spatial quadratic residue
# ---------------------------------------------------------------------------


def _to_pairs(p: Poly):
    """Split c * v^(a) wbar^(b) terms into {(a, b): coefficient poly}."""
    out = {}
    for m, c in p.items():
        a = b = None
        rest = []
        for s, e in m:
            if s[0] == "v":
                if e != 1 or a is not None or s[-1] != "0":
                    raise ValueError(f"not a spatial quadratic monomial: {m}")
                a = int(s[1:-1])
            elif s[0] == "w":
                if e != 1 or b is not None or s[-1] != "0":
                    raise ValueError(f"not a spatial quadratic monomial: {m}")
                b = int(s[1:-1])
            else:
                rest.append((s, e))
        if a is None or b is None:
            raise ValueError(f"monomial without v*wbar factor: {m}")
        slot = out.setdefault((a, b), {})
        mono = tuple(sorted(rest))
        nc = slot.get(mono, 0.0) + c
        if nc == 0:
            slot.pop(mono, None)
        else:
            slot[mono] = nc
    return {k: v for k, v in out.items() if v}


def reduce_spatial(p: Poly):
    """Rewrite p as d/dx(flux) + pointwise over the canonical basis.

    Canonical basis: diagonal pairs v^(m) wbar^(m) and antisymmetric
    adjacent pairs v^(m+1) wbar^(m) - v^(m) wbar^(m+1).
    """
    d = _to_pairs(p)
    flux: Poly = {}

    def put(slot, poly):
        if not poly:
            return
        d[slot] = p_add(d.get(slot, {}), poly)
        if not d[slot]:
            del d[slot]

    while True:
        target = None
        for (a, b) in sorted(d, key=lambda ab: (ab[0] + ab[1], ab[0] - ab[1]), reverse=True):
            if a > b + 1:
                target = (a, b)
                break
            if a == b + 1 and p_add(d.get((a, b), {}), d.get((b, a), {})):
                target = (a, b)
                break
        if target is None:
            break
        a, b = target
        c_ab = d.pop((a, b), {})
        c_ba = d.pop((b, a), {})
        s = p_scale(p_add(c_ab, c_ba), 0.5)
        t = p_scale(p_sub(c_ab, c_ba), 0.5)
        if s:
            if a == b + 1:
                # s (v_{b+1} wbar_b + v_b wbar_{b+1}) = Dx(s v_b wbar_b) - s_x v_b wbar_b
                flux = p_add(flux, p_mul(s, p_mul(_vp(b), _wp(b))))
                put((b, b), p_scale(poly_dx(s), -1))
            else:
                flux = p_add(flux, p_mul(s, _pair_sym(a - 1, b)))
                put((a - 1, b), p_scale(poly_dx(s), -1))
                put((b, a - 1), p_scale(poly_dx(s), -1))
                put((a - 1, b + 1), p_scale(s, -1))
                put((b + 1, a - 1), p_scale(s, -1))
        if t:
            if a > b + 1:
                flux = p_add(flux, p_mul(t, _pair_anti(a - 1, b)))
                put((a - 1, b), p_scale(poly_dx(t), -1))
                put((b, a - 1), poly_dx(t))
                put((a - 1, b + 1), p_scale(t, -1))
                put((b + 1, a - 1), t)
            else:
                put((a, b), t)
                put((b, a), p_scale(t, -1))
    return flux, d


@lru_cache(maxsize=1)
def defect_corrections():
    """Canonical (flux, pointwise) completion of the printed identity."""
    flux, pairs = reduce_spatial(defect_poly())
    return flux, pairs


def correction_report():
    """Human-readable summary of the printed identity's correction set."""
    flux, pairs = defect_corrections()
    lines = []
    if flux:
        lines.append("add to the spatial flux:")
        for (a, b), cp in sorted(_to_pairs(flux).items()):
            lines.append(f"  slot d_x^{a} v * conj(d_x^{b} v): {_fmt_poly(cp)}")
    if pairs:
        lines.append("add to the pointwise right side:")
        for (a, b), cp in sorted(pairs.items()):
            lines.append(f"  slot d_x^{a} v * conj(d_x^{b} v): {_fmt_poly(cp)}")
    if not lines:
        lines.append("printed identity is exact; no corrections needed")
    return "\n".join(lines)


def _fmt_mono(m):
    return "*".join(s if e == 1 else f"{s}^{e}" for s, e in m) or "1"


def _fmt_poly(p: Poly, max_terms=40):
    parts = []
    for m, c in sorted(p.items()):
        cr = c.real if abs(c.imag) < 1e-300 else c
        parts.append(f"{cr:+g}*{_fmt_mono(m)}")
    if len(parts) > max_terms:
        parts = parts[:max_terms] + [f"... ({len(p)} terms)"]
    return " ".join(parts)


# ---------------------------------------------------------------------------
# numeric evaluation against jets
# ---------------------------------------------------------------------------


def env_from_jets(l_jet, psi_jet, v_jet):
    """Evaluation environment mapping engine symbols to jet derivatives."""
    env = {}
    for j in range(l_jet.kx_order + 1):
        for k in range(l_jet.kt_order + 1):
            env[sym_l(j, k)] = complex(l_jet.derivative(j, k)).real
    for j in range(psi_jet.kx_order + 1):
        env[sym_psi(j)] = complex(psi_jet.derivative(j, 0)).real
    for j in range(v_jet.kx_order + 1):
        for k in range(v_jet.kt_order + 1):
            val = complex(v_jet.derivative(j, k))
            env[sym_v(j, k)] = val
            env[sym_w(j, k)] = val.conjugate()
    return env


def defect_value(l_jet, psi_jet, v_jet) -> complex:
    """Numeric value of the printed identity's defect at one point."""
    return evaluate_poly(defect_poly(), env_from_jets(l_jet, psi_jet, v_jet))
