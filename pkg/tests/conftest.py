import json

import pytest

from titan import backend as backend_mod
from titan import prompts, taskgen


@pytest.fixture(scope="session")
def corpus():
    return taskgen.WordCorpus.bundled()


@pytest.fixture(scope="session")
def library():
    return prompts.load_templates()


def write_replay(path, entries):
    """entries: iterable of (phase, messages, temperature, sample_index, text)."""
    with open(path, "w", encoding="utf-8") as fh:
        for phase, messages, temperature, sample_index, text in entries:
            fh.write(
                json.dumps(
                    {
                        "key": backend_mod.request_key(phase, messages, temperature),
                        "phase": phase,
                        "request_messages": messages,
                        "temperature": temperature,
                        "sample_index": sample_index,
                        "response_text": text,
                        "usage": None,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def literal_solution_code(gold) -> str:
    """A fenced script whose solution() returns the gold answer as a literal."""
    value = gold.value
    if gold.kind == "number":
        text = str(value)
        literal = text if "." in text or "e" in text.lower() else str(int(text))
    elif gold.kind == "binary":
        literal = str(int(str(value)))
    elif gold.kind == "list":
        literal = repr(list(value))
    else:
        literal = repr(str(value))
    return f"```python\ndef solution():\n    return {literal}\n```"
