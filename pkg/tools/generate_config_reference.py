from maritime_mec._config import SECTIONS, ScenarioConfig, iter_fields
from collections import defaultdict


if __name__ == "__main__":
    defaults = ScenarioConfig()
    # SECTION -> (key, default, unit, doc)
    table = defaultdict(list)
    for f in iter_fields():
        table[f.metadata["section"]].append(
            (f.name, getattr(defaults, f.name), f.metadata["unit"], f.metadata["doc"])
        )

    for section in SECTIONS:
        if section in table:
            print(f"### [{section}]")
            print("| Key | Default | Unit | Description |")
            print(" | --- | --- | --- | --- | ")
            for key, default, unit, doc in table[section]:
                doc = doc.replace("|", "\\|")
                print(f"| `{key}` | `{default!r}` | {unit} | {doc} | ")
