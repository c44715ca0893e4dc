"""Older copy of a text helper."""


def count_vowels(text: str) -> int:
    """Count vowels (legacy copy)."""
    total = 0
    for ch in text.lower():
        if ch in "aeiou":
            total += 1
    return total
