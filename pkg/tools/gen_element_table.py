#!/usr/bin/env python3
"""Regenerate src/dive/data/elements.json, the embedded element data asset.

Sources: IUPAC 2021 standard atomic weights (abridged; mass number of the
most stable isotope for elements without a standard weight), Cordero et al.
2008 covalent radii (Pyykko single-bond radii past Cm), Pauling
electronegativities (Allen-scale values for the light noble gases and
flat 1.3 estimates for the late actinides, marked below), CRC melting
points. Valence subshell counts are derived from ground-state electron
configurations (Madelung filling plus the usual exception list), counting
every electron outside the preceding noble-gas core.

The JSON output is committed; this script only exists so the table can be
audited and regenerated.
"""

import json
import os

# symbol, name, atomic weight, covalent radius (pm), electronegativity, melting point (K)
RAW = [
    ("H", "Hydrogen", 1.008, 31, 2.20, 14.01),
    ("He", "Helium", 4.0026, 28, 4.16, 0.95),
    ("Li", "Lithium", 6.94, 128, 0.98, 453.65),
    ("Be", "Beryllium", 9.0122, 96, 1.57, 1560.0),
    ("B", "Boron", 10.81, 84, 2.04, 2349.0),
    ("C", "Carbon", 12.011, 76, 2.55, 3823.0),
    ("N", "Nitrogen", 14.007, 71, 3.04, 63.15),
    ("O", "Oxygen", 15.999, 66, 3.44, 54.36),
    ("F", "Fluorine", 18.998, 57, 3.98, 53.48),
    ("Ne", "Neon", 20.180, 58, 4.79, 24.56),
    ("Na", "Sodium", 22.990, 166, 0.93, 370.95),
    ("Mg", "Magnesium", 24.305, 141, 1.31, 923.0),
    ("Al", "Aluminium", 26.982, 121, 1.61, 933.47),
    ("Si", "Silicon", 28.085, 111, 1.90, 1687.0),
    ("P", "Phosphorus", 30.974, 107, 2.19, 317.3),
    ("S", "Sulfur", 32.06, 105, 2.58, 388.36),
    ("Cl", "Chlorine", 35.45, 102, 3.16, 171.6),
    ("Ar", "Argon", 39.95, 106, 3.24, 83.8),
    ("K", "Potassium", 39.098, 203, 0.82, 336.53),
    ("Ca", "Calcium", 40.078, 176, 1.00, 1115.0),
    ("Sc", "Scandium", 44.956, 170, 1.36, 1814.0),
    ("Ti", "Titanium", 47.867, 160, 1.54, 1941.0),
    ("V", "Vanadium", 50.942, 153, 1.63, 2183.0),
    ("Cr", "Chromium", 51.996, 139, 1.66, 2180.0),
    ("Mn", "Manganese", 54.938, 139, 1.55, 1519.0),
    ("Fe", "Iron", 55.845, 132, 1.83, 1811.0),
    ("Co", "Cobalt", 58.933, 126, 1.88, 1768.0),
    ("Ni", "Nickel", 58.693, 124, 1.91, 1728.0),
    ("Cu", "Copper", 63.546, 132, 1.90, 1357.77),
    ("Zn", "Zinc", 65.38, 122, 1.65, 692.68),
    ("Ga", "Gallium", 69.723, 122, 1.81, 302.91),
    ("Ge", "Germanium", 72.630, 120, 2.01, 1211.4),
    ("As", "Arsenic", 74.922, 119, 2.18, 1090.0),
    ("Se", "Selenium", 78.971, 120, 2.55, 494.0),
    ("Br", "Bromine", 79.904, 120, 2.96, 265.8),
    ("Kr", "Krypton", 83.798, 116, 3.00, 115.79),
    ("Rb", "Rubidium", 85.468, 220, 0.82, 312.46),
    ("Sr", "Strontium", 87.62, 195, 0.95, 1050.0),
    ("Y", "Yttrium", 88.906, 190, 1.22, 1799.0),
    ("Zr", "Zirconium", 91.224, 175, 1.33, 2128.0),
    ("Nb", "Niobium", 92.906, 164, 1.60, 2750.0),
    ("Mo", "Molybdenum", 95.95, 154, 2.16, 2896.0),
    ("Tc", "Technetium", 98.0, 147, 1.90, 2430.0),
    ("Ru", "Ruthenium", 101.07, 146, 2.20, 2607.0),
    ("Rh", "Rhodium", 102.91, 142, 2.28, 2237.0),
    ("Pd", "Palladium", 106.42, 139, 2.20, 1828.05),
    ("Ag", "Silver", 107.87, 145, 1.93, 1234.93),
    ("Cd", "Cadmium", 112.41, 144, 1.69, 594.22),
    ("In", "Indium", 114.82, 142, 1.78, 429.75),
    ("Sn", "Tin", 118.71, 139, 1.96, 505.08),
    ("Sb", "Antimony", 121.76, 139, 2.05, 903.78),
    ("Te", "Tellurium", 127.60, 138, 2.10, 722.66),
    ("I", "Iodine", 126.90, 139, 2.66, 386.85),
    ("Xe", "Xenon", 131.29, 140, 2.60, 161.4),
    ("Cs", "Caesium", 132.91, 244, 0.79, 301.59),
    ("Ba", "Barium", 137.33, 215, 0.89, 1000.0),
    ("La", "Lanthanum", 138.91, 207, 1.10, 1193.0),
    ("Ce", "Cerium", 140.12, 204, 1.12, 1068.0),
    ("Pr", "Praseodymium", 140.91, 203, 1.13, 1208.0),
    ("Nd", "Neodymium", 144.24, 201, 1.14, 1297.0),
    ("Pm", "Promethium", 145.0, 199, 1.15, 1315.0),  # EN estimated
    ("Sm", "Samarium", 150.36, 198, 1.17, 1345.0),
    ("Eu", "Europium", 151.96, 198, 1.18, 1099.0),  # EN estimated
    ("Gd", "Gadolinium", 157.25, 196, 1.20, 1585.0),
    ("Tb", "Terbium", 158.93, 194, 1.21, 1629.0),  # EN estimated
    ("Dy", "Dysprosium", 162.50, 192, 1.22, 1680.0),
    ("Ho", "Holmium", 164.93, 192, 1.23, 1734.0),
    ("Er", "Erbium", 167.26, 189, 1.24, 1802.0),
    ("Tm", "Thulium", 168.93, 190, 1.25, 1818.0),
    ("Yb", "Ytterbium", 173.05, 187, 1.26, 1097.0),  # EN estimated
    ("Lu", "Lutetium", 174.97, 187, 1.27, 1925.0),
    ("Hf", "Hafnium", 178.49, 175, 1.30, 2506.0),
    ("Ta", "Tantalum", 180.95, 170, 1.50, 3290.0),
    ("W", "Tungsten", 183.84, 162, 2.36, 3695.0),
    ("Re", "Rhenium", 186.21, 151, 1.90, 3459.0),
    ("Os", "Osmium", 190.23, 144, 2.20, 3306.0),
    ("Ir", "Iridium", 192.22, 141, 2.20, 2719.0),
    ("Pt", "Platinum", 195.08, 136, 2.28, 2041.4),
    ("Au", "Gold", 196.97, 136, 2.54, 1337.33),
    ("Hg", "Mercury", 200.59, 132, 2.00, 234.32),
    ("Tl", "Thallium", 204.38, 145, 1.62, 577.0),
    ("Pb", "Lead", 207.2, 146, 2.33, 600.61),
    ("Bi", "Bismuth", 208.98, 148, 2.02, 544.55),
    ("Po", "Polonium", 209.0, 140, 2.00, 527.0),
    ("At", "Astatine", 210.0, 150, 2.20, 575.0),
    ("Rn", "Radon", 222.0, 150, 2.20, 202.0),  # EN estimated
    ("Fr", "Francium", 223.0, 260, 0.70, 300.0),
    ("Ra", "Radium", 226.0, 221, 0.90, 973.0),
    ("Ac", "Actinium", 227.0, 215, 1.10, 1323.0),
    ("Th", "Thorium", 232.04, 206, 1.30, 2023.0),
    ("Pa", "Protactinium", 231.04, 200, 1.50, 1841.0),
    ("U", "Uranium", 238.03, 196, 1.38, 1405.3),
    ("Np", "Neptunium", 237.0, 190, 1.36, 917.0),
    ("Pu", "Plutonium", 244.0, 187, 1.28, 912.5),
    ("Am", "Americium", 243.0, 180, 1.30, 1449.0),
    ("Cm", "Curium", 247.0, 169, 1.30, 1613.0),
    ("Bk", "Berkelium", 247.0, 168, 1.30, 1259.0),  # radius/EN estimated from here on
    ("Cf", "Californium", 251.0, 168, 1.30, 1173.0),
    ("Es", "Einsteinium", 252.0, 165, 1.30, 1133.0),
    ("Fm", "Fermium", 257.0, 167, 1.30, 1800.0),
    ("Md", "Mendelevium", 258.0, 173, 1.30, 1100.0),
    ("No", "Nobelium", 259.0, 176, 1.30, 1100.0),
    ("Lr", "Lawrencium", 262.0, 161, 1.30, 1900.0),
]

# Madelung order of subshell filling: (n, l, capacity)
MADELUNG = [
    (1, "s", 2), (2, "s", 2), (2, "p", 6), (3, "s", 2), (3, "p", 6),
    (4, "s", 2), (3, "d", 10), (4, "p", 6), (5, "s", 2), (4, "d", 10),
    (5, "p", 6), (6, "s", 2), (4, "f", 14), (5, "d", 10), (6, "p", 6),
    (7, "s", 2), (5, "f", 14), (6, "d", 10), (7, "p", 6),
]

# Ground-state configurations that deviate from Madelung filling,
# written as {(n, l): electron count} overrides for the affected subshells.
EXCEPTIONS = {
    "Cr": {(3, "d"): 5, (4, "s"): 1},
    "Cu": {(3, "d"): 10, (4, "s"): 1},
    "Nb": {(4, "d"): 4, (5, "s"): 1},
    "Mo": {(4, "d"): 5, (5, "s"): 1},
    "Ru": {(4, "d"): 7, (5, "s"): 1},
    "Rh": {(4, "d"): 8, (5, "s"): 1},
    "Pd": {(4, "d"): 10, (5, "s"): 0},
    "Ag": {(4, "d"): 10, (5, "s"): 1},
    "La": {(4, "f"): 0, (5, "d"): 1},
    "Ce": {(4, "f"): 1, (5, "d"): 1},
    "Gd": {(4, "f"): 7, (5, "d"): 1},
    "Pt": {(5, "d"): 9, (6, "s"): 1},
    "Au": {(5, "d"): 10, (6, "s"): 1},
    "Ac": {(5, "f"): 0, (6, "d"): 1},
    "Th": {(5, "f"): 0, (6, "d"): 2},
    "Pa": {(5, "f"): 2, (6, "d"): 1},
    "U": {(5, "f"): 3, (6, "d"): 1},
    "Np": {(5, "f"): 4, (6, "d"): 1},
    "Cm": {(5, "f"): 7, (6, "d"): 1},
    "Lr": {(5, "f"): 14, (6, "d"): 0, (7, "p"): 1},
}

NOBLE_Z = [2, 10, 18, 36, 54, 86]


def configuration(z, symbol):
    """Full ground-state configuration as {(n, l): count}."""
    config = {}
    remaining = z
    for n, l, cap in MADELUNG:
        if remaining <= 0:
            break
        take = min(cap, remaining)
        config[(n, l)] = take
        remaining -= take
    for shell, count in EXCEPTIONS.get(symbol, {}).items():
        config[shell] = count
    config = {k: v for k, v in config.items() if v > 0}
    assert sum(config.values()) == z, symbol
    return config


def valence_counts(z, symbol):
    """Electrons per subshell type outside the preceding noble-gas core."""
    core_z = max((nz for nz in NOBLE_Z if nz < z), default=0)
    core = configuration(core_z, "") if core_z else {}
    config = configuration(z, symbol)
    counts = {"s": 0, "p": 0, "d": 0, "f": 0}
    for (n, l), cnt in config.items():
        outside = cnt - core.get((n, l), 0)
        if outside > 0:
            counts[l] += outside
    return counts


def period_of(z):
    for p, limit in enumerate([2, 10, 18, 36, 54, 86, 118], start=1):
        if z <= limit:
            return p
    raise ValueError(z)


def group_of(z):
    # Lanthanides and actinides are folded into group 3.
    if z in (1, 3, 11, 19, 37, 55, 87):
        return 1
    if z in (4, 12, 20, 38, 56, 88):
        return 2
    if z == 2:
        return 18
    if 5 <= z <= 10:
        return z + 8
    if 13 <= z <= 18:
        return z
    if 21 <= z <= 30:
        return z - 18
    if 31 <= z <= 36:
        return z - 18
    if 39 <= z <= 48:
        return z - 36
    if 49 <= z <= 54:
        return z - 36
    if 57 <= z <= 71:
        return 3
    if 72 <= z <= 80:
        return z - 68
    if 81 <= z <= 86:
        return z - 68
    if 89 <= z <= 103:
        return 3
    raise ValueError(z)


def main():
    elements = []
    for z, (symbol, name, weight, radius, en, melt) in enumerate(RAW, start=1):
        v = valence_counts(z, symbol)
        elements.append({
            "symbol": symbol,
            "name": name,
            "atomic_number": z,
            "atomic_weight": weight,
            "period": period_of(z),
            "group": group_of(z),
            "covalent_radius_pm": radius,
            "electronegativity": en,
            "valence_s": v["s"],
            "valence_p": v["p"],
            "valence_d": v["d"],
            "valence_f": v["f"],
            "valence_total": v["s"] + v["p"] + v["d"] + v["f"],
            "melting_point_K": melt,
        })
    out = {
        "version": 1,
        "description": "Element data for H through Lr: IUPAC atomic weights, "
                       "Cordero/Pyykko covalent radii, Pauling electronegativities "
                       "(estimates where unmeasured), CRC melting points, valence "
                       "subshell counts from ground-state configurations.",
        "elements": elements,
    }
    here = os.path.dirname(os.path.abspath(__file__))
    target = os.path.join(here, "..", "src", "dive", "data", "elements.json")
    os.makedirs(os.path.dirname(target), exist_ok=True)
    with open(target, "w", encoding="utf-8") as fh:
        json.dump(out, fh, indent=1)
        fh.write("\n")
    print(f"wrote {len(elements)} elements to {os.path.normpath(target)}")


if __name__ == "__main__":
    main()
