"""Mock back-office: fixture-backed function results, plus a remote HTTP client seam."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Protocol

from .feature_model import FeatureModel, Value, value_matches_type, value_to_text
from .workflow import FunctionCatalog

log = logging.getLogger(__name__)

Contract = tuple[FeatureModel, FunctionCatalog]


class DataAdminError(Exception):
    pass


class UnknownCitizenError(DataAdminError):
    def __init__(self, citizen_id: str):
        super().__init__(f"unknown citizen {citizen_id!r}")
        self.citizen_id = citizen_id


class UnknownFunctionError(DataAdminError):
    def __init__(self, name: str):
        super().__init__(f"unknown function {name!r}")
        self.name = name


class FunctionUnavailableError(DataAdminError):
    def __init__(self, name: str):
        super().__init__(f"function {name!r} is unavailable")
        self.name = name


class FixtureError(DataAdminError):
    pass


class DataAdminClient(Protocol):
    def invoke(self, fn_name: str, citizen_id: str, inputs: Mapping[str, Value]) -> dict[str, Value]:
        ...


@dataclass(frozen=True)
class FixtureStore:
    """citizen id -> function name -> node path -> typed value."""

    citizens: Mapping[str, Mapping[str, Mapping[str, Value]]] = field(default_factory=dict)

    def has_citizen(self, citizen_id: str) -> bool:
        return citizen_id in self.citizens

    def results_for(self, citizen_id: str, fn_name: str) -> Mapping[str, Value]:
        return self.citizens.get(citizen_id, {}).get(fn_name, {})


def _function_contracts(contracts: Iterable[Contract]) -> dict[str, list[Contract]]:
    by_name: dict[str, list[Contract]] = {}
    for family, catalog in contracts:
        for fn in catalog.functions:
            by_name.setdefault(fn.name, []).append((family, catalog))
    return by_name


def _coerce(family: FeatureModel, path: str, raw: object) -> Value:
    node = family.node_at(path)
    value_type = node.attribute.value_type
    if value_type == "date" and isinstance(raw, str):
        import datetime

        value: Value = datetime.date.fromisoformat(raw)
    elif value_type == "float" and isinstance(raw, int) and not isinstance(raw, bool):
        value = float(raw)
    else:
        value = raw  # type: ignore[assignment]
    if not value_matches_type(value_type, value):
        raise FixtureError(f"{path}: value {raw!r} does not match type {value_type!r}")
    return value


def load_fixtures(path: str | Path, contracts: Iterable[Contract], *,
                  ignore_unknown: bool = False) -> FixtureStore:
    """Load and validate a fixture file against the services it must serve.

    Every path must be provided by a same-named function in some catalog, and every
    value must match the family model's declared attribute type. With ignore_unknown,
    entries for functions/paths outside the given catalogs are skipped with a notice
    instead (a shared fixture file driving a single-service run).
    """
    contracts = list(contracts)
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FixtureError(f"cannot load fixtures from {path}: {exc}") from exc

    by_name = _function_contracts(contracts)
    citizens: dict[str, dict[str, dict[str, Value]]] = {}
    problems: list[str] = []
    skipped: list[str] = []
    for citizen_id, per_fn in data.get("citizens", {}).items():
        citizens[citizen_id] = {}
        for fn_name, values in per_fn.items():
            if fn_name not in by_name:
                (skipped if ignore_unknown else problems).append(
                    f"{citizen_id}/{fn_name}: function not in any catalog")
                continue
            citizens[citizen_id][fn_name] = {}
            for value_path, raw in values.items():
                owner = None
                for family, catalog in by_name[fn_name]:
                    if value_path in catalog.get(fn_name).provides:
                        owner = family
                        break
                if owner is None:
                    (skipped if ignore_unknown else problems).append(
                        f"{citizen_id}/{fn_name}/{value_path}: path not provided by this function")
                    continue
                try:
                    citizens[citizen_id][fn_name][value_path] = _coerce(owner, value_path, raw)
                except FixtureError as exc:
                    problems.append(f"{citizen_id}/{fn_name}: {exc}")
    if problems:
        raise FixtureError("fixture file is inconsistent with the catalogs: " + "; ".join(problems))
    for entry in skipped:
        log.info("skipping fixture entry outside the loaded catalogs: %s", entry)
    return FixtureStore(citizens=citizens)


@dataclass
class FixtureDataAdmin:
    """Deterministic, fixture-backed client; `unavailable` simulates backend outages."""

    store: FixtureStore
    contracts: list[Contract]
    unavailable: frozenset[str] = frozenset()

    def __post_init__(self):
        # same-named functions may exist per service; the client filters against the union
        self._provides: dict[str, set[str]] = {}
        for _family, catalog in self.contracts:
            for fn in catalog.functions:
                self._provides.setdefault(fn.name, set()).update(fn.provides)

    def invoke(self, fn_name: str, citizen_id: str, inputs: Mapping[str, Value]) -> dict[str, Value]:
        provides = self._provides.get(fn_name)
        if provides is None:
            raise UnknownFunctionError(fn_name)
        if fn_name in self.unavailable:
            raise FunctionUnavailableError(fn_name)
        if not self.store.has_citizen(citizen_id):
            raise UnknownCitizenError(citizen_id)
        results = self.store.results_for(citizen_id, fn_name)
        return {path: value for path, value in results.items() if path in provides}


class RemoteDataAdmin:
    """HTTP seam mirroring the fixture client: POST {base}/functions/{name}."""

    def __init__(self, base_url: str, contracts: Iterable[Contract], client=None):
        import httpx

        self.base_url = base_url.rstrip("/")
        self.contracts = list(contracts)
        self._by_name = _function_contracts(self.contracts)
        self._client = client or httpx.Client()

    def invoke(self, fn_name: str, citizen_id: str, inputs: Mapping[str, Value]) -> dict[str, Value]:
        import httpx

        if fn_name not in self._by_name:
            raise UnknownFunctionError(fn_name)
        payload = {
            "citizenId": citizen_id,
            "inputs": {path: value_to_text(value) for path, value in inputs.items()},
        }
        try:
            response = self._client.post(f"{self.base_url}/functions/{fn_name}", json=payload)
        except httpx.HTTPError as exc:
            raise DataAdminError(f"backend unreachable: {exc}") from exc
        if response.status_code == 404:
            error = response.json().get("error", "")
            if error == "unknown-citizen":
                raise UnknownCitizenError(citizen_id)
            raise UnknownFunctionError(fn_name)
        if response.status_code == 503:
            raise FunctionUnavailableError(fn_name)
        if response.status_code != 200:
            raise DataAdminError(f"backend error {response.status_code}: {response.text}")

        family, catalog = self._by_name[fn_name][0]
        fn = catalog.get(fn_name)
        values: dict[str, Value] = {}
        for path, raw in response.json().get("values", {}).items():
            if path not in fn.provides:
                log.warning("dropping %s from %s: outside the function contract", path, fn_name)
                continue
            values[path] = _coerce(family, path, raw)
        return values
