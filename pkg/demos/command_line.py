"""The full command-line workflow in a scratch directory.

Equivalent shell session::

    contactbayes gen --out data
    contactbayes fit data/fit_contact.csv data/fit_no_contact.csv --out data/model.json
    contactbayes run data/trace.csv data/model.json --out data/run.csv
    contactbayes --output-format csv eval data/run.csv data/trace.csv
"""

import tempfile
from pathlib import Path

from contactbayes.cli import main

with tempfile.TemporaryDirectory() as tmp:
    d = Path(tmp) / "data"
    main(["gen", "--out", str(d)])
    main(["fit", str(d / "fit_contact.csv"), str(d / "fit_no_contact.csv"), "--out", str(d / "model.json")])
    main(["run", str(d / "trace.csv"), str(d / "model.json"), "--out", str(d / "run.csv")])
    print(*(d / "run.csv").read_text().splitlines()[600:605], sep="\n")
    main(["--output-format", "csv", "eval", str(d / "run.csv"), str(d / "trace.csv")])
