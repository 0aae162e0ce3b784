"""Plain-text description of a registered model or measure."""
import inspect
from typing import Callable, List

from src.levy import quadrature
from src.levy.measure import LevyMeasure
from src.levy.registry import MEASURES, build_measure
from src.model.assumptions import check_assumptions
from src.model.zoo import ZOO, build_model
from src.utils.errors import UnknownName

TAIL_LEVELS = (1, 4, 16, 64)


def _defaults(factory: Callable, skip: tuple = ()) -> List[str]:
    lines = []
    for name, param in inspect.signature(factory).parameters.items():
        if name in skip:
            continue
        default = "required" if param.default is inspect.Parameter.empty else repr(param.default)
        lines.append(f"  {name:12} = {default}")
    return lines


def _measure_lines(measure: LevyMeasure) -> List[str]:
    if measure.is_zero:
        return ["  mass                 = 0", "  ∫(1∧|e|²)dλ          = 0", "  infinite activity    = False"]
    validation = quadrature.validate(measure)
    mass = "infinite" if validation.infinite_activity else f"{measure.mass(0.0):.6g}"
    lines = [
        f"  mass                 = {mass}",
        f"  ∫(1∧|e|²)dλ          = {validation.value:.6g}",
        f"  infinite activity    = {validation.infinite_activity}",
        f"  mass beyond radius   = {validation.mass_beyond_radius:.3g}",
    ]
    for k in TAIL_LEVELS:
        lines.append(f"  tail mass m({k:<3})     = {measure.tail_mass(k):.6g}")
    return lines


def describe_measure(name: str) -> str:
    measure = build_measure(name)
    lines = [f"measure {name}", "parameters:"] + _defaults(MEASURES[name])
    lines += ["properties at the defaults:"] + _measure_lines(measure)
    return "\n".join(lines)


def describe_model(name: str) -> str:
    entry = ZOO[name]
    spec = build_model(name)
    report = check_assumptions(spec)
    lines = [f"model {name}: {spec.description}", f"dims: {spec.dims.as_dict()}  T={spec.T}",
             f"coupling mode: {spec.coupling_mode.value}", "parameters:"]
    lines += _defaults(entry.factory, skip=("measure",))
    lines += [f"default measure: {spec.measure.name} {spec.measure.params}"]
    lines += ["assumptions at the defaults:"]
    for check in report.checks:
        mark = "✓" if check.passed else "✗"
        lines.append(f"  {mark} {check.name:28} C ≈ {check.constant:.4g}")
    lines += [f"  note: {note}" for note in report.limitations]
    lines += ["exercises:"] + [f"  - {construct}" for construct in entry.constructs]
    return "\n".join(lines)


def describe(name: str) -> str:
    """Models are looked up first, then measures."""
    if name in ZOO:
        return describe_model(name)
    if name in MEASURES:
        return describe_measure(name)
    raise UnknownName(f"'{name}' is neither a model ({', '.join(sorted(ZOO))}) "
                      f"nor a measure ({', '.join(sorted(MEASURES))})", key="describe.name")
