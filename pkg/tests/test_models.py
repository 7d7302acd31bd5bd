import dataclasses

import numpy as np
import pytest

from models import (ExogenousInputs, GuardState, PGMode, RateParameters, SafetyPolicy, StockState,
                    authority_drive, clamp_state, compute_auxiliaries, derivatives, evaluate,
                    update_guard, validate_inputs, validate_parameters, validate_state)

BASE_STATE = StockState(h=0.50, a=0.40, s=0.25, t=0.40, u=0.20, c=0.30)
BASE_INPUTS = ExogenousInputs(sigma_env=0.35, explanation_quality=0.75, annotation_quality=0.65,
                              task_rate=0.5)


def _random_state(rng):
    return StockState(*rng.uniform(0.0, 1.0, 6))


def _random_inputs(rng):
    return ExogenousInputs(*rng.uniform(0.0, 1.0, 4))


# ==================== AUXILIARES Y FLUJOS ====================

def test_auxiliaries_at_baseline():
    aux = compute_auxiliaries(BASE_STATE, BASE_INPUTS, RateParameters(), GuardState(), SafetyPolicy())
    assert aux.f_ha == pytest.approx(0.30, abs=1e-12)
    assert aux.f_ah == pytest.approx(0.325, abs=1e-12)
    assert aux.f_sync == pytest.approx(0.3125, abs=1e-12)
    assert aux.delta_obs == pytest.approx(0.2625, abs=1e-12)
    assert aux.opacity == pytest.approx(0.25, abs=1e-12)
    assert aux.pg == pytest.approx(0.20, abs=1e-12)
    assert aux.oversight_load == 0.0
    assert aux.tr_eff == 0.5


def test_literal_performance_gap():
    params = RateParameters(pg_mode=PGMode.LITERAL)
    aux = compute_auxiliaries(BASE_STATE, BASE_INPUTS, params, GuardState(), SafetyPolicy())
    assert aux.pg == pytest.approx(-0.10, abs=1e-12)


def test_auxiliaries_boundary_channels():
    state = dataclasses.replace(BASE_STATE, s=1.0)
    inputs = ExogenousInputs(sigma_env=0.6, explanation_quality=1.0, annotation_quality=0.0, task_rate=0.5)
    aux = compute_auxiliaries(state, inputs, RateParameters(), GuardState(), SafetyPolicy())
    assert aux.f_ha == state.a
    assert aux.f_ah == 0.0
    assert aux.delta_obs == 0.0
    assert aux.opacity == 0.0


def test_guard_suppresses_task_rate():
    aux = compute_auxiliaries(BASE_STATE, BASE_INPUTS, RateParameters(), GuardState(b3_active=True),
                              SafetyPolicy(rho_suppress=0.5))
    assert aux.tr_eff == 0.25


def test_derivatives_hand_oracle():
    _, d = evaluate(BASE_STATE, BASE_INPUTS, RateParameters(), GuardState(), SafetyPolicy())
    assert d.dh == pytest.approx(0.06, abs=1e-12)
    assert d.da == pytest.approx(0.057, abs=1e-12)
    assert d.ds == pytest.approx(0.04625, abs=1e-12)
    assert d.dt_trust == pytest.approx(0.05, abs=1e-12)
    assert d.du == pytest.approx(0.18, abs=1e-12)
    assert d.dc == pytest.approx(-0.01, abs=1e-12)


def test_authority_flow_vanishes_without_drivers():
    state = dataclasses.replace(BASE_STATE, t=0.0, s=0.0)
    inputs = dataclasses.replace(BASE_INPUTS, sigma_env=0.0)
    _, d = evaluate(state, inputs, RateParameters(), GuardState(), SafetyPolicy())
    assert d.du == 0.0


def test_guard_forces_authority_withdrawal():
    _, d = evaluate(BASE_STATE, BASE_INPUTS, RateParameters(), GuardState(b3_active=True),
                    SafetyPolicy(r_safe=0.2))
    assert d.du == pytest.approx(-0.2, abs=1e-12)


def test_slew_limit_clips_authority_rate():
    params = RateParameters(k1=5.0, k2=0.0, k3=0.0)
    state = dataclasses.replace(BASE_STATE, t=0.4)
    aux = compute_auxiliaries(state, BASE_INPUTS, params, GuardState(), SafetyPolicy())
    d = derivatives(state, aux, BASE_INPUTS, params, GuardState(), SafetyPolicy())
    assert authority_drive(state, BASE_INPUTS, params) == pytest.approx(2.0)
    assert d.du == 0.9


def test_authority_drive_is_linear():
    params = RateParameters()
    rng = np.random.default_rng(7)
    for _ in range(50):
        state = _random_state(rng)
        inputs = _random_inputs(rng)
        base = authority_drive(state, inputs, params)
        h = 0.01
        assert authority_drive(dataclasses.replace(state, t=state.t + h), inputs, params) - base == \
            pytest.approx(params.k1 * h, abs=1e-12)
        assert authority_drive(dataclasses.replace(state, s=state.s + h), inputs, params) - base == \
            pytest.approx(params.k2 * h, abs=1e-12)
        assert authority_drive(state, dataclasses.replace(inputs, sigma_env=inputs.sigma_env + h),
                               params) - base == pytest.approx(-params.k3 * h, abs=1e-12)


def test_guard_dominance_and_slew_bound_on_random_states():
    rng = np.random.default_rng(11)
    policy = SafetyPolicy()
    params = RateParameters(k1=3.0, k2=3.0)
    for _ in range(200):
        state = _random_state(rng)
        inputs = _random_inputs(rng)
        aux, d = evaluate(state, inputs, params, GuardState(b3_active=True), policy)
        assert d.du <= -policy.r_safe + 1e-12
        assert aux.tr_eff == policy.rho_suppress * inputs.task_rate
        _, libre = evaluate(state, inputs, params, GuardState(), policy)
        assert abs(libre.du) <= params.u_slew


def test_evaluation_is_deterministic():
    primera = evaluate(BASE_STATE, BASE_INPUTS, RateParameters(), GuardState(), SafetyPolicy())
    segunda = evaluate(BASE_STATE, BASE_INPUTS, RateParameters(), GuardState(), SafetyPolicy())
    assert primera == segunda


# ==================== GUARDA B3 ====================

@pytest.mark.parametrize('c, activa, esperado', [
    (0.85, False, True),
    (0.78, True, True),
    (0.70, True, False),
    (0.80, False, False),
    (0.75, True, True),
])
def test_update_guard_transitions(c, activa, esperado):
    state = dataclasses.replace(BASE_STATE, c=c)
    policy = SafetyPolicy(c_safe=0.8, hysteresis=0.05)
    assert update_guard(state, GuardState(b3_active=activa), policy).b3_active is esperado


def _toggles(cargas, policy):
    guard = GuardState()
    cambios = 0
    for c in cargas:
        nueva = update_guard(dataclasses.replace(BASE_STATE, c=c), guard, policy)
        cambios += nueva.b3_active != guard.b3_active
        guard = nueva
    return cambios


def test_oscillation_inside_band_never_toggles():
    policy = SafetyPolicy(c_safe=0.8, hysteresis=0.05)
    cargas = 0.775 + 0.024 * np.sin(np.linspace(0.0, 20.0, 400))
    assert _toggles(cargas, policy) == 0


def test_crossing_and_release_toggle_twice():
    policy = SafetyPolicy(c_safe=0.8, hysteresis=0.05)
    cargas = [0.70, 0.79, 0.85, 0.78, 0.76, 0.79, 0.74, 0.76, 0.79]
    assert _toggles(cargas, policy) == 2


# ==================== PROYECCIÓN ====================

def test_clamp_interior_state_untouched():
    resultado = clamp_state(BASE_STATE)
    assert resultado.state == BASE_STATE
    assert resultado.clamped == ()
    assert not any(resultado.flags)


def test_clamp_projects_and_flags():
    resultado = clamp_state(dataclasses.replace(BASE_STATE, u=1.07, c=-0.02))
    assert resultado.state.u == 1.0
    assert resultado.state.c == 0.0
    assert resultado.clamped == ('u', 'c')
    assert resultado.flags == (False, False, False, False, True, True)


# ==================== VALIDACIÓN ====================

def test_default_parameters_are_valid():
    assert validate_parameters(RateParameters(), SafetyPolicy()).ok


def test_negative_gain_is_reported():
    resultado = validate_parameters(RateParameters(k3=-0.1), SafetyPolicy())
    assert not resultado.ok
    assert 'k3 must be ≥ 0' in resultado.messages()


def test_hysteresis_wider_than_threshold_is_reported():
    resultado = validate_parameters(RateParameters(), SafetyPolicy(c_safe=0.8, hysteresis=0.9))
    assert 'hysteresis < c_safe' in [v.constraint for v in resultado.violations]


def test_all_violations_are_collected():
    resultado = validate_parameters(RateParameters(alpha1=-1.0, u_slew=0.0),
                                    SafetyPolicy(rho_suppress=1.0))
    restricciones = {v.constraint for v in resultado.violations}
    assert {'alpha1 ≥ 0', 'u_slew > 0', '0 ≤ rho_suppress < 1'} <= restricciones


def test_state_and_inputs_must_lie_in_unit_interval():
    assert validate_state(BASE_STATE).ok
    assert not validate_state(dataclasses.replace(BASE_STATE, h=1.2)).ok
    assert validate_inputs(BASE_INPUTS).ok
    resultado = validate_inputs(dataclasses.replace(BASE_INPUTS, task_rate=float('nan')))
    assert resultado.messages() == ['task_rate must be in [0, 1]']
