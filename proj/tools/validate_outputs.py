#!/usr/bin/env python3
"""Runs the CLI end to end and validates every emitted file against schemas/."""
import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema
from referencing import Registry, Resource


def main():
    tacs, schema_dir, fixtures = sys.argv[1], pathlib.Path(sys.argv[2]), pathlib.Path(sys.argv[3])
    schemas = {p.name: json.loads(p.read_text()) for p in schema_dir.glob("*.schema.json")}
    registry = Registry().with_resources((name, Resource.from_contents(s)) for name, s in schemas.items())

    def check(path, schema):
        validator = jsonschema.Draft202012Validator(schemas[schema], registry=registry)
        path = pathlib.Path(path)
        docs = [json.loads(l) for l in path.read_text().splitlines() if l] if path.suffix == ".jsonl" else [json.loads(path.read_text())]
        for i, doc in enumerate(docs):
            errors = sorted(validator.iter_errors(doc), key=str)
            if errors:
                sys.exit(f"{path} (record {i}) fails {schema}: {errors[0].message}")
        print(f"ok {path.name} ({len(docs)} records) against {schema}")

    def run(*args):
        subprocess.run([tacs, *map(str, args)], check=True)

    for f in fixtures.glob("*.spec.json"):
        check(f, "world_spec.schema.json")
    for f in fixtures.glob("*.noise.json"):
        check(f, "noise.schema.json")
    for f in fixtures.glob("*.config.json"):
        check(f, "config.schema.json")

    with tempfile.TemporaryDirectory() as tmp:
        t = pathlib.Path(tmp)
        run("gen-world", fixtures / "multi_room.spec.json", "--out", t / "world.json")
        check(t / "world.json", "world.schema.json")
        run("simulate", t / "world.json", "--noise", fixtures / "trial.noise.json", "--seed", 1, "--out", t / "run.jsonl")
        check(t / "run.jsonl", "runlog_line.schema.json")
        run("build-graph", t / "run.jsonl", "--out", t / "graph.json", "--report", t / "report.json", "--tum", t / "traj.tum")
        check(t / "graph.json", "scene_graph.schema.json")
        check(t / "report.json", "report.schema.json")
        run("evaluate", t / "graph.json", t / "graph.json", "--world", t / "world.json", "--out", t / "eval.json")
        check(t / "eval.json", "evaluation.schema.json")
        run("trials", t / "world.json", "--noise", fixtures / "trial.noise.json", "--seeds", 1, 2, "--out-dir", t / "trials")
        for f in sorted((t / "trials").iterdir()):
            kind = {"graph": "scene_graph", "report": "report", "evaluation": "evaluation", "runlog": "runlog_line"}
            key = next(k for k in kind if k in f.name)
            check(f, kind[key] + ".schema.json")

        (t / "traj.json").write_text(json.dumps({"waypoints": [[1.0, 1.0], [2.0, 1.0]]}))
        check(t / "traj.json", "trajectory.schema.json")


if __name__ == "__main__":
    main()
