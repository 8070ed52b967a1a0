"""Fixture-backed backend client, fixture validation, and the remote HTTP seam."""

import datetime
import json

import pytest

from formweave.data_admin import (
    FixtureDataAdmin,
    FixtureError,
    FixtureStore,
    FunctionUnavailableError,
    RemoteDataAdmin,
    UnknownCitizenError,
    UnknownFunctionError,
    load_fixtures,
)
from formweave.workflow import DataFunction, FunctionCatalog

from conftest import feat, model


@pytest.fixture
def person_contract():
    family = model(feat("Name", attr="string"), feat("Age", attr="integer"),
                   feat("Since", attr="date"), feat("Fee", attr="float"),
                   feat("Member", attr="boolean"), name="Svc")
    catalog = FunctionCatalog(service_name="Svc", functions=(
        DataFunction("getPerson", (), ("Svc.Name", "Svc.Age", "Svc.Since", "Svc.Fee", "Svc.Member")),
    ))
    return family, catalog


def write_fixtures(tmp_path, payload):
    path = tmp_path / "fixtures.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


class TestLoadFixtures:
    def test_valid_file_with_type_coercion(self, tmp_path, person_contract):
        path = write_fixtures(tmp_path, {"citizens": {"C1": {"getPerson": {
            "Svc.Name": "Jansen", "Svc.Age": 44, "Svc.Since": "2014-09-01",
            "Svc.Fee": 12, "Svc.Member": True,
        }}}})
        store = load_fixtures(path, [person_contract])
        values = store.results_for("C1", "getPerson")
        assert values["Svc.Since"] == datetime.date(2014, 9, 1)
        assert values["Svc.Fee"] == 12.0 and isinstance(values["Svc.Fee"], float)
        assert values["Svc.Member"] is True

    def test_unknown_path_is_a_load_error_naming_it(self, tmp_path, person_contract):
        path = write_fixtures(tmp_path, {"citizens": {"C1": {"getPerson": {"Svc.Nope": "x"}}}})
        with pytest.raises(FixtureError) as err:
            load_fixtures(path, [person_contract])
        assert "Svc.Nope" in str(err.value)

    def test_unknown_function_is_a_load_error(self, tmp_path, person_contract):
        path = write_fixtures(tmp_path, {"citizens": {"C1": {"mystery": {"Svc.Name": "x"}}}})
        with pytest.raises(FixtureError):
            load_fixtures(path, [person_contract])

    def test_type_mismatch_is_a_load_error(self, tmp_path, person_contract):
        path = write_fixtures(tmp_path, {"citizens": {"C1": {"getPerson": {"Svc.Age": "old"}}}})
        with pytest.raises(FixtureError):
            load_fixtures(path, [person_contract])

    def test_empty_file_gives_empty_store(self, tmp_path, person_contract):
        path = write_fixtures(tmp_path, {})
        store = load_fixtures(path, [person_contract])
        assert not store.has_citizen("C1")

    def test_ignore_unknown_skips_foreign_entries(self, tmp_path, person_contract):
        path = write_fixtures(tmp_path, {"citizens": {"C1": {
            "getPerson": {"Svc.Name": "Jansen", "Other.Path": "x"},
            "foreign": {"Other.Y": 1},
        }}})
        store = load_fixtures(path, [person_contract], ignore_unknown=True)
        assert store.results_for("C1", "getPerson") == {"Svc.Name": "Jansen"}


class TestFixtureClient:
    def client(self, person_contract, unavailable=()):
        store = FixtureStore(citizens={"C1": {"getPerson": {"Svc.Name": "Jansen"}}})
        return FixtureDataAdmin(store=store, contracts=[person_contract],
                                unavailable=frozenset(unavailable))

    def test_returns_exactly_the_fixture_map(self, person_contract):
        assert self.client(person_contract).invoke("getPerson", "C1", {}) == {"Svc.Name": "Jansen"}

    def test_unknown_citizen(self, person_contract):
        with pytest.raises(UnknownCitizenError):
            self.client(person_contract).invoke("getPerson", "C9", {})

    def test_unknown_function(self, person_contract):
        with pytest.raises(UnknownFunctionError):
            self.client(person_contract).invoke("getWeather", "C1", {})

    def test_simulated_unavailability(self, person_contract):
        with pytest.raises(FunctionUnavailableError):
            self.client(person_contract, unavailable=["getPerson"]).invoke("getPerson", "C1", {})

    def test_partial_results_are_legal(self, person_contract):
        # fixture covers one of five provided paths
        values = self.client(person_contract).invoke("getPerson", "C1", {})
        assert set(values) == {"Svc.Name"}

    def test_paths_outside_provides_filtered(self, person_contract):
        store = FixtureStore(citizens={"C1": {"getPerson": {"Svc.Name": "J", "Svc.Rogue": "x"}}})
        client = FixtureDataAdmin(store=store, contracts=[person_contract])
        assert set(client.invoke("getPerson", "C1", {})) == {"Svc.Name"}

    def test_deterministic(self, person_contract):
        client = self.client(person_contract)
        assert client.invoke("getPerson", "C1", {}) == client.invoke("getPerson", "C1", {})


class TestRemoteSeam:
    def remote(self, person_contract, tmp_path):
        """RemoteDataAdmin wired straight into a server app over an in-process transport."""
        from formweave.interaction import ServiceDefinition
        from formweave.server import create_app

        family, catalog = person_contract
        fixtures = write_fixtures(tmp_path, {"citizens": {"C1": {"getPerson": {
            "Svc.Name": "Jansen", "Svc.Age": 44}}}})
        app = create_app(
            services={"Svc": ServiceDefinition(name="Svc", family=family, catalog=catalog)},
            fixtures_file=fixtures,
        )
        from fastapi.testclient import TestClient

        http = TestClient(app)
        return RemoteDataAdmin("http://testserver", [person_contract], client=http)

    def test_round_trip_with_typed_values(self, person_contract, tmp_path):
        remote = self.remote(person_contract, tmp_path)
        values = remote.invoke("getPerson", "C1", {})
        assert values == {"Svc.Name": "Jansen", "Svc.Age": 44}

    def test_unknown_citizen_maps_to_error(self, person_contract, tmp_path):
        remote = self.remote(person_contract, tmp_path)
        with pytest.raises(UnknownCitizenError):
            remote.invoke("getPerson", "C9", {})

    def test_unknown_function_maps_to_error(self, person_contract, tmp_path):
        remote = self.remote(person_contract, tmp_path)
        with pytest.raises(UnknownFunctionError):
            remote.invoke("getWeather", "C1", {})
