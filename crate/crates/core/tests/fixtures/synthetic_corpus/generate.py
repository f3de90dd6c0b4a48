"""Writes the 12-firm synthetic corpus used by the end-to-end tests.

Each firm gets one plain-text report built from a fixed mix of climate and
non-climate paragraphs, so the stub backend yields varied report labels.
F12 has no climate paragraph at all. Run from this directory.
"""

import csv
import os

CLIMATE = {
    "risk": "Transition risk and physical flood exposure threaten our coastal assets; climate change could cause stranded plant losses.",
    "risk_num": "Scope 1 emissions of 1.2 Mt CO2 expose us to a carbon price risk of 40 EUR per tonne by 2030.",
    "opp": "Decarbonization opens revenue opportunities in low-carbon products and services, and we see clear innovation benefits.",
    "opp_num": "Our climate strategy targets 15% revenue growth from green offerings, an advantage built on a lower carbon intensity.",
    "neutral": "This section summarises the greenhouse gas accounting boundary used across the group and its subsidiaries.",
    "commit_nz": "We commit to net zero across scope 1, scope 2 and scope 3 by 2050, validated by an external body.",
    "commit_red": "We pledge an emission reduction of 42% by 2030, cutting emissions at every production site.",
    "commit_gen": "We are determined to embed the climate strategy into governance and executive remuneration.",
    "reduction": "Cutting emissions from logistics remains a priority while the carbon footprint of suppliers is assessed.",
    "nz_gen": "Carbon neutrality of our offices is the long-term climate target of the group.",
}

OTHER = [
    "The board met eleven times during the year and reviewed the audit committee charter.",
    "Customer satisfaction remained high across all retail channels and regions.",
    "Dividends were paid in cash to all shareholders of record at the closing date.",
    "Short",
]

MIX = {
    "F01": ["risk", "risk_num", "commit_nz", "commit_red", "commit_gen", "neutral"],
    "F02": ["opp", "opp_num", "commit_nz", "commit_nz", "nz_gen", "commit_gen"],
    "F03": ["risk", "opp", "risk_num", "opp_num", "commit_red"],
    "F04": ["neutral", "neutral", "reduction", "neutral"],
    "F05": ["risk", "risk_num", "risk", "neutral", "commit_gen"],
    "F06": ["opp", "opp_num", "commit_red", "commit_red", "commit_nz", "nz_gen"],
    "F07": ["risk", "opp_num", "commit_nz", "neutral", "nz_gen"],
    "F08": ["neutral", "commit_gen", "commit_gen", "risk"],
    "F09": ["opp", "opp", "neutral", "commit_nz"],
    "F10": ["risk_num", "opp_num", "commit_red", "commit_nz", "commit_gen", "neutral"],
    "F11": ["risk", "neutral", "reduction", "nz_gen"],
    "F12": [],
}

# firm_id, sector, scope1, scope2, scope3, employees, market_cap_bln
FIRMS = [
    ("F01", "Énergie", "1200000", "85000", "9800000", "52000", "88.4"),
    ("F02", "Technologie de l'information", "3200", "41000", "120000", "7138", "7.24"),
    ("F03", "Industrie", "410000", "60000", "", "23000", "19.5"),
    ("F04", "Finances", "900", "12000", "", "15400", "42.0"),
    ("F05", "Matériaux de base", "2500000", "310000", "4100000", "38000", "31.0"),
    ("F06", "Consommation cyclique", "56000", "22000", "890000", "9800", "12.1"),
    ("F07", "Fournisseur", "3800000", "14000", "510000", "11000", "25.7"),
    ("F08", "Santé", "21000", "18000", "260000", "61000", "95.2"),
    ("F09", "Communication", "4100", "9100", "44000", "640", "0.8"),
    ("F10", "Immobilier", "", "7300", "", "1900", "3.3"),
    ("F11", "Consommation non cyclique", "150000", "95000", "2100000", "120000", "260.0"),
    ("F12", "Industrie", "78000", "15000", "300000", "4200", "5.6"),
]


def main():
    os.makedirs("docs", exist_ok=True)
    rows = []
    for i, (firm, keys) in enumerate(sorted(MIX.items())):
        paras = []
        for j, k in enumerate(keys):
            paras.append(CLIMATE[k])
            paras.append(OTHER[(i + j) % len(OTHER)])
        if not keys:
            paras = OTHER[:3]
        path = f"docs/{firm.lower()}.txt"
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(f"{firm} annual sustainability report\n\n")
            f.write("\n\n".join(paras) + "\n")
        rows.append((firm, path, 2023, "sustainability_report"))
    with open("documents.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["firm_id", "path", "doc_year", "kind"])
        w.writerows(rows)
    with open("firms.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["firm_id", "sector", "scope1", "scope2", "scope3", "employees", "market_cap_bln"])
        w.writerows(FIRMS)


if __name__ == "__main__":
    main()
