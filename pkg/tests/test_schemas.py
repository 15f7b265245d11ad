"""Tests for dataset schemas and label encoding."""

from __future__ import annotations

import pytest

from lstm_ids.data.schemas import BOT_IOT, SCHEMAS, UNSW_NB15, DatasetSchema, get_schema
from lstm_ids.exceptions import ConfigError, DataError


class TestBuiltInSchemas:

    def test_unsw_layout(self):
        assert UNSW_NB15.num_features == 13
        assert UNSW_NB15.num_classes == 10
        assert UNSW_NB15.label_column == "attack_cat"
        assert UNSW_NB15.ip_columns == ("srcip", "dstip")

    def test_bot_iot_layout(self):
        assert BOT_IOT.num_features == 10
        assert BOT_IOT.class_names == ("Normal", "DDoS", "DoS", "Reconnaissance", "Theft")
        assert BOT_IOT.label_column == "category"

    def test_get_schema(self):
        assert get_schema("bot_iot") is BOT_IOT

    def test_unknown_schema_lists_valid(self):
        with pytest.raises(ConfigError, match="bot_iot, unsw_nb15"):
            get_schema("kdd99")


class TestLabels:

    @pytest.mark.parametrize("schema", list(SCHEMAS.values()), ids=list(SCHEMAS))
    def test_encode_decode_identity(self, schema):
        for name in schema.class_names:
            assert schema.decode_label(schema.encode_label(name)) == name

    def test_order_defines_indices(self):
        assert [UNSW_NB15.encode_label(n) for n in UNSW_NB15.class_names] == list(range(10))

    def test_case_insensitive(self):
        assert BOT_IOT.encode_label("  ddos ") == 1

    def test_alias(self):
        assert UNSW_NB15.canonical_label("Backdoors") == "Backdoor"

    def test_unknown_label(self):
        with pytest.raises(DataError, match="'Botnet' is not a bot_iot class"):
            BOT_IOT.encode_label("Botnet")

    def test_decode_out_of_range(self):
        with pytest.raises(DataError, match="outside"):
            BOT_IOT.decode_label(5)


class TestHeaderResolution:

    def test_case_and_whitespace(self):
        header = [" SRCIP", "Sport", "dstip", "dsport", "dur", "sbytes", "dbytes",
                  "sttl", "dttl", "sload", "dload", "spkts", "dpkts", "Attack_Cat"]
        resolved = UNSW_NB15.resolve_header(header)
        assert resolved["srcip"] == " SRCIP"
        assert resolved["attack_cat"] == "Attack_Cat"
        assert None not in resolved.values()

    def test_column_alias(self):
        resolved = BOT_IOT.resolve_header(["stddev"])
        assert resolved["std_dev"] == "stddev"
        assert resolved["rate"] is None


class TestCustomSchema:

    def test_round_trip_through_dict(self):
        schema = DatasetSchema.custom(["x", "ip"], "kind", ["good", "bad"], ["ip"])
        assert DatasetSchema.from_dict(schema.to_dict()) == schema

    def test_built_in_from_dict(self):
        assert DatasetSchema.from_dict(BOT_IOT.to_dict()) is BOT_IOT

    def test_all_problems_reported(self):
        with pytest.raises(ConfigError) as excinfo:
            DatasetSchema.custom([], " ", [], ["ip"])
        assert len(excinfo.value.violations) == 4

    def test_duplicate_features(self):
        with pytest.raises(ConfigError, match="distinct"):
            DatasetSchema.custom(["x", "X"], "label", ["a"])
