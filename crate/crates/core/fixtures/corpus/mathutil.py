"""Numeric helpers."""
import math
from typing import Callable, Dict, List


def clamp(value: int, low: int, high: int) -> int:
    """Limit value to [low, high]; the bounds are swapped if reversed."""
    if low > high:
        low, high = high, low
    if value < low:
        return low
    if value > high:
        return high
    return value


def gcd_iterative(a: int, b: int) -> int:
    """Greatest common divisor of |a| and |b|."""
    a, b = abs(a), abs(b)
    while b:
        a, b = b, a % b
    return a


def fizzbuzz_label(number: int) -> str:
    """Fizz, Buzz, FizzBuzz or the number itself as text."""
    if number % 15 == 0:
        return "FizzBuzz"
    if number % 3 == 0:
        return "Fizz"
    if number % 5 == 0:
        return "Buzz"
    return str(number)


def collatz_steps(start: int) -> int:
    """Steps needed to reach 1 from |start| + 1."""
    x = abs(start) + 1
    steps = 0
    while x != 1:
        if x % 2 == 0:
            x //= 2
        else:
            x = 3 * x + 1
        steps += 1
    return steps


def describe(values: List[float]) -> Dict[str, float]:
    """Mean and population spread of values; empty input gives {}."""
    if not values:
        return {}
    mean = sum(values) / len(values)
    spread = 0.0
    for v in values:
        spread += (v - mean) ** 2
    return {"mean": mean, "spread": spread / len(values)}


def hypotenuse_ratio(a: float, b: float) -> float:
    """Length of the hypotenuse over the longer leg, 0 for degenerate legs."""
    longer = max(abs(a), abs(b))
    if longer == 0:
        return 0.0
    return math.hypot(a, b) / longer


def default_timeout(retries: int) -> int:
    """Timeout in seconds for a retry count."""
    if retries > 3:
        return 30
    return 10


def identity_pair(a, b):
    return [a, b]


def apply_twice(fn: Callable[[int], int], x: int) -> int:
    """Apply fn twice unless x is negative."""
    if x < 0:
        return x
    return fn(fn(x))


def digit_sum(number: int) -> int:
    """Sum of the decimal digits of |number|."""
    number = abs(number)
    total = 0
    while number > 0:
        total += number % 10
        number //= 10
    return total
