"""Access to the versioned prompt text assets shipped with the package."""

from importlib import resources


def load(name: str) -> str:
    """Read a prompt asset by file name, trailing newline stripped."""
    text = (resources.files("candidate_support") / "prompts" / name).read_text(encoding="utf-8")
    return text.rstrip("\n")
