"""Small text helpers."""
import re
from collections import Counter


def calculate_ngram_repetition(text: str, n: int) -> float:
    """Share of word n-grams that occur more than once.

    Args:
        text (str): Words separated by whitespace.
        n (int): Size of each n-gram.

    Returns:
        float: Repeated n-grams divided by all n-grams, or 0 when the text
        holds fewer than n words.

    Raises:
        ValueError: If n is not positive.
    """
    words = text.split()
    ngrams = [tuple(words[i : i + n]) for i in range(len(words) - n + 1)]
    ngram_counts = Counter(ngrams)
    total_ngrams = len(ngrams)
    repeated_ngrams = sum(1 for count in ngram_counts.values() if count > 1)
    return repeated_ngrams / total_ngrams if total_ngrams > 0 else 0


def count_vowels(text: str) -> int:
    """Number of ASCII vowels in text, ignoring case."""
    total = 0
    for ch in text.lower():
        if ch in "aeiou":
            total += 1
    return total


def caesar_shift(message: str, shift: int) -> str:
    """Rotate ASCII letters by shift positions, keeping case."""
    out = []
    for ch in message:
        if "a" <= ch <= "z":
            out.append(chr((ord(ch) - 97 + shift) % 26 + 97))
        elif "A" <= ch <= "Z":
            out.append(chr((ord(ch) - 65 + shift) % 26 + 65))
        else:
            out.append(ch)
    return "".join(out)


def slugify(title: str) -> str:
    """Lowercase title with runs of non-alphanumerics collapsed to '-'.

    >>> slugify("Hello, World!")
    """
    slug = re.sub(r"[^a-z0-9]+", "-", title.lower()).strip("-")
    if not slug:
        return "untitled"
    return slug


def truncate_words(text: str, limit: int) -> str:
    """Keep the first limit words, appending '...' when words were cut."""
    words = text.split()
    if len(words) <= limit:
        return " ".join(words)
    return " ".join(words[:limit]) + "..."


def is_palindrome(phrase: str) -> bool:
    """True when the alphanumeric characters read the same both ways."""
    cleaned = []
    for ch in phrase:
        if ch.isalnum():
            cleaned.append(ch.lower())
    return cleaned == cleaned[::-1]


def classify_char(c: str) -> str:
    """Coarse category of the first character."""
    if not c:
        return "empty"
    ch = c[0]
    if ch.isdigit():
        return "digit"
    elif ch.isupper():
        return "upper"
    elif ch.islower():
        return "lower"
    elif ch == " ":
        return "space"
    elif ch in ".,;:":
        return "punct"
    elif ch in "([{":
        return "open"
    elif ch in ")]}":
        return "close"
    elif ch in "+-*/":
        return "operator"
    elif ch in "'\"":
        return "quote"
    elif ch == "_":
        return "underscore"
    return "other:" + ch


def log_message(message: str) -> None:
    """Print message with a prefix."""
    if message:
        print("[log] " + message)


def parse_key_values(line: str) -> dict:
    """Parse 'k=v;k2=v2' pairs; parts without '=' are skipped."""
    result = {}
    for part in line.split(";"):
        if "=" not in part:
            continue
        key, _, value = part.partition("=")
        result[key.strip()] = value.strip()
    return result
