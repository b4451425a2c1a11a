from maritime_mec._error import _ERRORS
import re
from collections import defaultdict

CATEGORY_MAPPING = {
    "C": "Configuration",
    "F": "Feasibility",
    "E": "Energy",
    "O": "Oracle",
    "V": "Certification",
    "D": "Model domain",
}


if __name__ == "__main__":
    # CATEGORY -> (code, message)
    table = defaultdict(list)
    for code, message in _ERRORS.items():
        match = re.match(r"([CFEOVD])(\d{4})", code)
        if match:
            table[match.group(1)].append((code, message))

    for category, name in CATEGORY_MAPPING.items():
        if category in table:
            print(f"## {name}")
            print("| Code | Message |")
            print(" | --- | --- | ")
            for code, message in sorted(table[category]):
                print(f"| {code} | {message} | ")
