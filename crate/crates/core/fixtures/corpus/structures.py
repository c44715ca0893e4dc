"""Helpers for nested data."""
import os
from collections import defaultdict
from typing import List


def merge_json_recursive(base, update):
    """Merge update into base and return a new value.

    Dictionaries merge key by key, recursing into shared keys. Two lists
    are concatenated. In every other case update wins. base is not
    modified.

    Args:
        base: Dictionary, list or scalar to start from.
        update: Value merged on top of base.

    Returns:
        The merged value.

    Examples:
        Input: base = {"a": 1}, update = {"a": 2}
        Output: {"a": 2}

        Input: base = [1, 2], update = [3, 4]
        Output: [1, 2, 3, 4]

        Input: base = {"a": {"b": 1}}, update = {"a": {"c": 2}}
        Output: {"a": {"b": 1, "c": 2}}
    """
    if not isinstance(base, dict) or not isinstance(update, dict):
        if isinstance(base, list) and isinstance(update, list):
            return base + update
        return update

    merged = base.copy()
    for key, value in update.items():
        if key in merged:
            merged[key] = merge_json_recursive(merged[key], value)
        else:
            merged[key] = value

    return merged


def flatten_list(nested):
    """Flatten arbitrarily nested lists, keeping other values as leaves."""
    if not isinstance(nested, list):
        return [nested]
    out = []
    for item in nested:
        if isinstance(item, list):
            out.extend(flatten_list(item))
        else:
            out.append(item)
    return out


def chunk_list(items: List[int], size: int) -> List[List[int]]:
    """Split items into consecutive chunks of at most size elements."""
    chunks = []
    current = []
    for item in items:
        current.append(item)
        if len(current) == size:
            chunks.append(current)
            current = []
    if current:
        chunks.append(current)
    return chunks


def dedupe_preserve_order(items: List[int]) -> List[int]:
    """Drop repeated values, keeping first occurrences in order."""
    seen = set()
    out = []
    for item in items:
        if item not in seen:
            seen.add(item)
            out.append(item)
    return out


def group_by_parity(values: list[int]) -> dict[str, list[int]]:
    """Split values into 'even' and 'odd' lists."""
    groups = defaultdict(list)
    for v in values:
        if v % 2 == 0:
            groups["even"].append(v)
        else:
            groups["odd"].append(v)
    return dict(groups)


def running_max(values: list[int]) -> list[int]:
    """Prefix maxima of values."""
    out = []
    best = None
    for v in values:
        if best is None or v > best:
            best = v
        out.append(best)
    return out


def get_or_default(mapping: dict, key: str, default: int) -> int:
    """Value under key, or default."""
    if key in mapping:
        return mapping[key]
    return default


def load_config(path):
    """Read a config file if it exists."""
    if os.path.exists(path):
        with open(path) as fh:
            return fh.read()
    return ""


def call_helper(value):
    """Delegate to a helper defined elsewhere."""
    if value:
        return helper_fn(value)
    return None


class Accumulator:
    def add(self, amount: int) -> int:
        if amount > 0:
            self.total = getattr(self, "total", 0) + amount
        return amount
