/** Client-side mirrors of the server's formula grammar and quantity rules.
 *
 * Edits are validated here before any request is sent; the server
 * re-validates on POST /review, so these checks only need to agree with
 * the service, never to replace it.
 */

const ELEMENT_SYMBOLS = [
  "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al",
  "Si", "P", "S", "Cl", "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe",
  "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr",
  "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn",
  "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm",
  "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W",
  "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn",
  "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk", "Cf",
  "Es", "Fm", "Md", "No", "Lr",
];

const ELEMENTS = new Set(ELEMENT_SYMBOLS);

const SUBSCRIPT_DIGITS: Record<string, string> = {
  "₀": "0", "₁": "1", "₂": "2", "₃": "3", "₄": "4",
  "₅": "5", "₆": "6", "₇": "7", "₈": "8", "₉": "9",
};

const SEPARATORS = new Set([" ", "\t", "·", "⋅"]);
const CLOSERS: Record<string, string> = { "(": ")", "[": "]" };

export class FormulaError extends Error {
  constructor(message: string, readonly offset: number) {
    super(`${message} at offset ${offset}`);
  }
}

/** Parse a formula into element amounts; throws FormulaError on bad input. */
export function parseFormula(raw: string): Map<string, number> {
  const text = [...raw].map((ch) => SUBSCRIPT_DIGITS[ch] ?? ch).join("");
  let i = 0;

  const skip = () => {
    while (i < text.length && SEPARATORS.has(text[i]!)) i += 1;
  };

  const parseNumber = (): number | null => {
    skip();
    const start = i;
    while (i < text.length && text[i]! >= "0" && text[i]! <= "9") i += 1;
    if (text[i] === "." && text[i + 1]! >= "0" && text[i + 1]! <= "9") {
      i += 1;
      while (i < text.length && text[i]! >= "0" && text[i]! <= "9") i += 1;
    }
    if (i === start) return null;
    const value = Number(text.slice(start, i));
    if (value === 0) {
      i = start;
      throw new FormulaError("zero subscript", start);
    }
    return value;
  };

  const parseSequence = (amounts: Map<string, number>, multiplier: number, closer: string | null) => {
    let sawItem = false;
    for (;;) {
      skip();
      const ch = text[i];
      if (ch === undefined) {
        if (closer !== null) throw new FormulaError(`missing '${closer}'`, i);
        break;
      }
      if (ch === closer) {
        i += 1;
        break;
      }
      if (ch === ")" || ch === "]") {
        throw new FormulaError(`unexpected '${ch}'`, i);
      }
      if (ch === "(" || ch === "[") {
        const open = i;
        i += 1;
        const inner = new Map<string, number>();
        parseSequence(inner, 1, CLOSERS[ch]!);
        if (inner.size === 0) throw new FormulaError("empty group", open);
        const count = parseNumber() ?? 1;
        for (const [sym, amt] of inner) {
          amounts.set(sym, (amounts.get(sym) ?? 0) + amt * count * multiplier);
        }
        sawItem = true;
      } else if (ch >= "A" && ch <= "Z") {
        const start = i;
        i += 1;
        while (i < text.length && text[i]! >= "a" && text[i]! <= "z") i += 1;
        const symbol = text.slice(start, i);
        if (!ELEMENTS.has(symbol)) {
          throw new FormulaError(`unknown element '${symbol}'`, start);
        }
        const count = parseNumber() ?? 1;
        amounts.set(symbol, (amounts.get(symbol) ?? 0) + count * multiplier);
        sawItem = true;
      } else {
        throw new FormulaError(`unexpected character '${ch}'`, i);
      }
    }
    if (!sawItem && closer === null) throw new FormulaError("formula has no elements", 0);
  };

  if (!raw || [...raw].every((ch) => SEPARATORS.has(ch))) {
    throw new FormulaError("empty formula", 0);
  }
  const amounts = new Map<string, number>();
  parseSequence(amounts, 1, null);
  return amounts;
}

export type QuantityKind = "temperature" | "pressure" | "gravimetric" | "volumetric" | "cycles";

interface UnitEntry {
  kind: QuantityKind;
  scale: number;
  offset: number;
}

const UNIT_TABLE: Record<string, UnitEntry> = {
  k: { kind: "temperature", scale: 1, offset: 0 },
  "°c": { kind: "temperature", scale: 1, offset: 273.15 },
  c: { kind: "temperature", scale: 1, offset: 273.15 },
  degc: { kind: "temperature", scale: 1, offset: 273.15 },
  bar: { kind: "pressure", scale: 1, offset: 0 },
  mbar: { kind: "pressure", scale: 1e-3, offset: 0 },
  mpa: { kind: "pressure", scale: 10, offset: 0 },
  kpa: { kind: "pressure", scale: 1e-2, offset: 0 },
  pa: { kind: "pressure", scale: 1e-5, offset: 0 },
  gpa: { kind: "pressure", scale: 1e4, offset: 0 },
  atm: { kind: "pressure", scale: 1.01325, offset: 0 },
  "wt%": { kind: "gravimetric", scale: 1, offset: 0 },
  "mass%": { kind: "gravimetric", scale: 1, offset: 0 },
  "%": { kind: "gravimetric", scale: 1, offset: 0 },
  "g/l": { kind: "volumetric", scale: 1, offset: 0 },
  "gh2/l": { kind: "volumetric", scale: 1, offset: 0 },
  "kg/m3": { kind: "volumetric", scale: 1, offset: 0 },
  cycles: { kind: "cycles", scale: 1, offset: 0 },
  cycle: { kind: "cycles", scale: 1, offset: 0 },
};

const VALUE_RE = /^\s*([+-]?(?:\d+(?:\.\d+)?|\.\d+)(?:[eE][+-]?\d+)?)\s*(.*?)\s*$/;

/** Parse "7.6 wt%" style input; bare numbers are already canonical. */
export function parseQuantity(input: string, kind: QuantityKind): number {
  const match = VALUE_RE.exec(input);
  if (!match) throw new Error(`no numeric value in '${input}'`);
  const value = Number(match[1]);
  const unitText = (match[2] ?? "")
    .replace(/₂/g, "2").replace(/[³₃]/g, "3")
    .replace(/[ .]/g, "")
    .toLowerCase();
  if (unitText === "") return value;
  const entry = UNIT_TABLE[unitText];
  if (!entry) throw new Error(`unrecognized unit '${match[2]}'`);
  if (entry.kind !== kind) throw new Error(`'${match[2]}' is a ${entry.kind} unit, not ${kind}`);
  return value * entry.scale + entry.offset;
}

export const QUANTITY_FIELDS: ReadonlyArray<{ key: string; label: string; kind: QuantityKind }> = [
  { key: "capacity_wt_pct", label: "Capacity (wt.%)", kind: "gravimetric" },
  { key: "volumetric_g_per_L", label: "Volumetric (g/L)", kind: "volumetric" },
  { key: "absorption_pressure_bar", label: "Absorption pressure (bar)", kind: "pressure" },
  { key: "desorption_pressure_bar", label: "Desorption pressure (bar)", kind: "pressure" },
  { key: "desorption_temperature_K", label: "Desorption temperature (K)", kind: "temperature" },
  { key: "measurement_temperature_K", label: "Measurement temperature (K)", kind: "temperature" },
  { key: "cycles", label: "Cycles", kind: "cycles" },
];

export const MATERIAL_CLASSES = [
  "interstitial", "ionic", "complex", "porous", "high_entropy",
  "superhydride", "multi_component", "other",
];

/** Field-keyed error messages for an edited record; empty map means valid. */
export function validateEdit(edit: Record<string, string>): Map<string, string> {
  const errors = new Map<string, string>();
  const formula = (edit.formula ?? "").trim();
  if (!formula) {
    errors.set("formula", "formula is required");
  } else {
    try {
      parseFormula(formula);
    } catch (err) {
      errors.set("formula", err instanceof Error ? err.message : String(err));
    }
  }
  for (const { key, kind } of QUANTITY_FIELDS) {
    const raw = (edit[key] ?? "").trim();
    if (!raw) continue;
    let canonical: number;
    try {
      canonical = parseQuantity(raw, kind);
    } catch (err) {
      errors.set(key, err instanceof Error ? err.message : String(err));
      continue;
    }
    if (key === "capacity_wt_pct" && (canonical < 0 || canonical > 100)) {
      errors.set(key, `capacity ${canonical} is outside 0-100 wt.%`);
    }
    if (kind === "temperature" && canonical <= 0) {
      errors.set(key, `temperature ${canonical} K must be positive`);
    }
    if (kind === "pressure" && canonical < 0) {
      errors.set(key, `pressure ${canonical} bar cannot be negative`);
    }
  }
  return errors;
}
