# Hand-annotated scope fixtures. Each function is preceded by
#   # expect: U={names} label=SC|WSC|Discard
# where U lists the free identifiers the function depends on.
import re
import os
import math as m
import numpy as np
from collections import Counter, defaultdict
from itertools import *
from os.path import join as pjoin
from typing import List, Optional
import requests

THRESHOLD = 10
_cache = {}


def helper(x):
    return x


# expect: U={} label=SC
def add(a, b):
    return a + b


# expect: U={} label=SC
def uses_builtins(items):
    return sorted(set(items), key=len)


# expect: U={re} label=WSC
def find_words(text):
    return re.findall(r"\w+", text)


# expect: U={Counter} label=WSC
def most_common(words):
    return Counter(words).most_common(1)


# expect: U={os} label=Discard
def home_dir():
    return os.environ.get("HOME")


# expect: U={m} label=WSC
def root(x):
    return m.sqrt(x)


# expect: U={np} label=WSC
def total(xs):
    return np.sum(xs)


# expect: U={helper} label=Discard
def calls_module_helper(x):
    return helper(x) + 1


# expect: U={THRESHOLD} label=Discard
def above(x):
    return x > THRESHOLD


# expect: U={} label=SC
def local_shadow(x):
    THRESHOLD = 3
    return x > THRESHOLD


# expect: U={} label=SC
def comprehension(xs):
    return [y * 2 for y in xs if y > 0]


# expect: U={} label=SC
def nested_comprehension(rows):
    return [c for r in rows for c in r]


# expect: U={} label=SC
def dict_and_set_comprehensions(xs):
    a = {k: v for k, v in enumerate(xs)}
    b = {v for v in xs}
    return a, b


# expect: U={} label=SC
def generator_expression(xs):
    return sum(x for x in xs)


# expect: U={} label=SC
def lambda_params(xs):
    return sorted(xs, key=lambda item: -item)


# expect: U={THRESHOLD} label=Discard
def lambda_free(xs):
    return list(filter(lambda v: v > THRESHOLD, xs))


# expect: U={} label=SC
def nested_function(x):
    def inner(y):
        return y * 2

    return inner(x)


# expect: U={} label=SC
def closure(x):
    def inner():
        return x + 1

    return inner()


# expect: U={} label=SC
def nonlocal_counter(n):
    count = 0

    def bump():
        nonlocal count
        count += 1

    for _ in range(n):
        bump()
    return count


# expect: U={_cache} label=Discard
def global_write(key, value):
    global _cache
    _cache[key] = value
    return value


# expect: U={} label=SC
def recursive(n):
    if n <= 1:
        return 1
    return n * recursive(n - 1)


# expect: U={} label=SC
def try_except(x):
    try:
        return int(x)
    except ValueError as err:
        return str(err)


# expect: U={} label=SC
def with_statement(path):
    with open(path) as fh:
        return fh.read()


# expect: U={} label=SC
def walrus(xs):
    if (n := len(xs)) > 2:
        return n
    return 0


# expect: U={} label=SC
def for_else(xs):
    for x in xs:
        if x:
            break
    else:
        x = None
    return x


# expect: U={} label=SC
def tuple_unpacking(pair):
    a, (b, c) = pair
    return a + b + c


# expect: U={} label=SC
def starred_unpacking(xs):
    first, *rest = xs
    return rest


# expect: U={} label=SC
def default_args(x, scale=2, *args, flag=False, **kwargs):
    return x * scale, args, flag, kwargs


# expect: U={THRESHOLD} label=Discard
def default_from_module(x, limit=THRESHOLD):
    return min(x, limit)


# expect: U={} label=SC
def annotated(x: List[int]) -> Optional[int]:
    return x[0] if x else None


# expect: U={re} label=WSC
def local_import(text):
    import re

    return re.sub("a", "b", text)


# expect: U={Counter} label=WSC
def local_from_import(xs):
    from collections import Counter

    return Counter(xs)


# expect: U={pjoin} label=Discard
def aliased_from_os(a, b):
    return pjoin(a, b)


# expect: U={chain} label=WSC
def star_imported(xs, ys):
    return list(chain(xs, ys))


# expect: U={requests} label=Discard
def network(url):
    return requests.get(url)


# expect: U={undefined_thing} label=Discard
def unknown_name(x):
    return undefined_thing(x)


# expect: U={exec} label=Discard
def dynamic_exec(code):
    exec(code)
    return code


# expect: U={re, Counter} label=WSC
def two_libraries(text):
    return Counter(re.findall(r"\w", text))


# expect: U={defaultdict} label=WSC
def grouping(pairs):
    out = defaultdict(list)
    for k, v in pairs:
        out[k].append(v)
    return out


# expect: U={} label=SC
def del_statement(d, k):
    x = d[k]
    del d[k]
    return x


# expect: U={} label=SC
def augmented(xs):
    total = 0
    for x in xs:
        total += x
    return total


# expect: U={} label=SC
def while_loop(n):
    i = 0
    while i < n:
        i += 1
    return i


# expect: U={} label=SC
def conditional_expression(a, b):
    return a if a > b else b


# expect: U={} label=SC
def string_formatting(name):
    return f"hello {name}!"


# expect: U={THRESHOLD} label=Discard
def fstring_free(name):
    return f"{name}:{THRESHOLD}"


# expect: U={} label=SC
def attribute_chain(obj):
    return obj.a.b.c


# expect: U={} label=SC
def nested_def_shadows_param(x):
    def x_fn(x):
        return x

    return x_fn(x)


# expect: U={helper} label=Discard
def nested_uses_module(x):
    def inner():
        return helper(x)

    return inner()


# expect: U={} label=SC
def class_inside(x):
    class Box:
        value = 1

    return Box.value + x


# expect: U={} label=SC
def exception_chain(x):
    try:
        return 1 / x
    except ZeroDivisionError:
        raise ValueError("zero") from None


# expect: U={} label=SC
def assert_statement(x):
    assert isinstance(x, int), "needs int"
    return x


# expect: U={m} label=WSC
def math_in_default_body(x, y=2):
    return m.pow(x, y) + m.pi


# expect: U={} label=SC
def shadowed_builtin(xs):
    len = 5
    return len + xs


# expect: U={} label=SC
def loop_var_after_loop(xs):
    for item in xs:
        pass
    return item


# expect: U={} label=SC
def multiple_targets(x):
    a = b = x
    return a + b


# expect: U={} label=SC
def slice_and_index(xs, i):
    return xs[i:], xs[:i], xs[::2]


# expect: U={} label=SC
def kwargs_call(d):
    return dict(**d)


# expect: U={np, re} label=WSC
def mixed_wsc(text):
    return np.array(re.split(",", text))


class Shape:
    sides = 0

    # expect: U={} label=SC
    def area(self, scale):
        return self.sides * scale

    # expect: U={sides} label=Discard
    def class_attr_not_visible(self):
        return sides

    # expect: U={m} label=WSC
    def perimeter(self, r):
        return 2 * m.pi * r
