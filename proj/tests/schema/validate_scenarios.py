#!/usr/bin/env python3
"""Validate bundled scenarios and their resolved echoes against the JSON schema."""
import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema
from referencing import Registry, Resource


def main() -> int:
    cli, scenarios = pathlib.Path(sys.argv[1]), pathlib.Path(sys.argv[2])
    schema = json.loads((scenarios / "schema.json").read_text())
    circuit = json.loads((scenarios / "circuit.schema.json").read_text())
    registry = Registry().with_resources(
        [(s["$id"], Resource.from_contents(s)) for s in (schema, circuit)])
    validator = jsonschema.Draft202012Validator(schema, registry=registry)

    failures = 0
    files = sorted(p for p in scenarios.glob("*.json") if not p.name.endswith("schema.json"))
    with tempfile.TemporaryDirectory() as tmp:
        for path in files:
            docs = {"file": json.loads(path.read_text())}
            out = pathlib.Path(tmp) / path.stem
            # A one-path cap fails fast after the echo is written.
            subprocess.run([str(cli), "paths", "--scenario", str(path), "--out", str(out), "--path-cap", "1"],
                           capture_output=True, check=False)
            echo = out / "scenario.resolved.json"
            if not echo.exists():
                print(f"FAIL {path.name}: no resolved echo written")
                failures += 1
                continue
            docs["echo"] = json.loads(echo.read_text())
            for kind, doc in docs.items():
                errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
                for e in errors:
                    print(f"FAIL {path.name} ({kind}): {'/'.join(map(str, e.path))}: {e.message}")
                failures += len(errors)
                if not errors:
                    print(f"ok   {path.name} ({kind})")

    bad = {"grid": {"sites": 8, "spacing": 1}, "initial": {"packets": [{}, {}]}, "layers": 1}
    if validator.is_valid(bad):
        print("FAIL schema accepts an unknown grid key")
        failures += 1
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
