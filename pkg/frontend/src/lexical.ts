// Field literal rules, kept in lockstep with the server.
// shared/lexical_vectors.json (repo root) is the contract both sides must satisfy.

const INTEGER_RE = /^[+-]?[0-9]+$/;
const FLOAT_RE = /^[+-]?[0-9]+\.[0-9]+$/;
const DATE_RE = /^([0-9]{4})-([0-9]{2})-([0-9]{2})$/;

export function validateText(valueType: string | null, text: string): string | null {
  switch (valueType) {
    case null:
    case "string":
      return text === "" ? "a value is required" : null;
    case "integer":
      return INTEGER_RE.test(text) ? null : "expected an integer (optional sign, digits)";
    case "float":
      return FLOAT_RE.test(text) ? null : "expected a decimal number with a '.'";
    case "boolean":
      return text === "true" || text === "false" ? null : "expected 'true' or 'false'";
    case "date": {
      const match = DATE_RE.exec(text);
      if (!match) {
        return "expected an ISO date YYYY-MM-DD";
      }
      const year = Number(match[1]);
      const month = Number(match[2]);
      const day = Number(match[3]);
      if (month < 1 || month > 12) {
        return "not a valid calendar date";
      }
      const days = new Date(Date.UTC(year, month, 0)).getUTCDate();
      if (day < 1 || day > days) {
        return "not a valid calendar date";
      }
      return null;
    }
    default:
      return null; // unknown types are left for the server to judge
  }
}
