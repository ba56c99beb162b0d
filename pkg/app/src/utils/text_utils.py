"""Text formatting utilities for reports."""
from typing import Any, Dict, Iterable, List, Mapping, Tuple


def format_value(value: Any, precision: int = 4) -> str:
    """Render numbers with fixed precision, everything else with str()."""
    if isinstance(value, bool) or value is None:
        return str(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.{precision}f}"
    return str(value)


def format_section(title: str, values: Mapping[str, Any], precision: int = 4) -> List[str]:
    lines = [f"[{title}]"]
    width = max((len(k) for k in values), default=0)
    for key in values:
        lines.append(f"  {key.ljust(width)} : {format_value(values[key], precision)}")
    return lines


def format_report(sections: Iterable[Tuple[str, Mapping[str, Any]]], precision: int = 4) -> str:
    """Structured plain-text report, one block per section.

    Args:
        sections: (title, mapping) pairs in output order.
        precision: Decimal places for floats.

    Returns:
        The report text, newline terminated.
    """
    lines: List[str] = []
    for title, values in sections:
        if lines:
            lines.append('')
        lines.extend(format_section(title, values, precision))
    return '\n'.join(lines) + '\n'


def flatten(prefix: str, values: Dict[str, Any]) -> Dict[str, Any]:
    """Flatten one level of nested dicts using dotted keys."""
    flat: Dict[str, Any] = {}
    for key, value in values.items():
        name = f"{prefix}.{key}" if prefix else key
        if isinstance(value, dict):
            flat.update(flatten(name, value))
        else:
            flat[name] = value
    return flat
