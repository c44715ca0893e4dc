# Control-flow fixtures. `# cc: N` gives the hand-counted cyclomatic
# complexity of the function that follows.


# cc: 1
def linear(a, b):
    c = a + b
    return c * 2


# cc: 2
def if_else(x):
    if x > 0:
        return x
    else:
        return -x


# cc: 2
def if_without_else(x):
    y = x
    if x < 0:
        y = 0
    return y


# cc: 3
def if_elif_else(x):
    if x > 0:
        return 1
    elif x < 0:
        return -1
    else:
        return x


# cc: 2
def for_loop(xs):
    total = 0
    for x in xs:
        total += x
    return total


# cc: 2
def while_loop(n):
    i = 0
    while i < n:
        i += 2
    return i


# cc: 3
def for_with_if(xs):
    out = []
    for x in xs:
        if x % 2:
            out.append(x)
    return out


# cc: 3
def nested_ifs(a, b):
    if a:
        if b:
            return 1
        return 2
    return 3


# cc: 3
def and_condition(a, b):
    if a > 0 and b > 0:
        return a * b
    return 0


# cc: 3
def or_chain(a, b, c):
    return a or b or c


# cc: 2
def ternary(x):
    return x if x > 0 else -x


# cc: 2
def filtered_comprehension(xs):
    return [x for x in xs if x > 0]


# cc: 2
def try_except(s):
    try:
        return int(s)
    except ValueError:
        return None


# cc: 3
def two_handlers(s):
    try:
        return 10 // int(s)
    except ValueError:
        return -1
    except ZeroDivisionError:
        return 0


# cc: 3
def while_with_break(n):
    i = 0
    while i < n:
        if i * i > n:
            break
        i += 1
    return i


# cc: 3
def for_else_search(xs, target):
    for i, x in enumerate(xs):
        if x == target:
            break
    else:
        i = -1
    return i


# cc: 3
def early_return_in_loop(xs):
    for x in xs:
        if x < 0:
            return x
    return 0


# cc: 3
def continue_in_loop(xs):
    total = 0
    for x in xs:
        if x is None:
            continue
        total += x
    return total


# cc: 3
def nested_loops(rows):
    total = 0
    for row in rows:
        for v in row:
            total += v
    return total


# cc: 2
def try_finally(s):
    result = None
    try:
        result = float(s)
    except ValueError:
        result = 0.0
    finally:
        s = None
    return result


# cc: 2
def with_block(lock, x):
    with lock:
        if x:
            return 1
    return 0


# cc: 3
def branch_inside_try(s):
    try:
        v = int(s)
        if v > 10:
            return 10
        return v
    except ValueError:
        return 0


# cc: 5
def elif_ladder(n):
    if n == 1:
        return "one"
    elif n == 2:
        return "two"
    elif n == 3:
        return "three"
    elif n == 4:
        return "four"
    return str(n)


# cc: 4
def fizzbuzz(n):
    if n % 15 == 0:
        return "FizzBuzz"
    if n % 3 == 0:
        return "Fizz"
    if n % 5 == 0:
        return "Buzz"
    return str(n)


# cc: 2
def raise_branch(x):
    if x < 0:
        raise ValueError("negative")
    return x


# cc: 2
def while_else(n):
    while n > 0:
        n -= 3
    else:
        n = abs(n)
    return n


# cc: 1
def nested_def_not_counted(x):
    def inner(y):
        if y:
            return 1
        return 0

    return inner(x) + x


# cc: 4
def mixed_boolean_ternary(a, b):
    ok = a and not b
    return (a if ok else b) or 0
