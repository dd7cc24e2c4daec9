import json

import pytest

from klab import gallery, scene
from klab.errors import ParseError, UnknownGallery


@pytest.mark.parametrize("name", sorted(gallery.GALLERY))
def test_gallery_scenes_round_trip_byte_identically(name):
    text = scene.dumps(gallery.get(name))
    again = scene.dumps(scene.loads(text))
    assert again == text
    assert json.loads(text)["schema"] == 1


def test_strip_scene_records_the_chart_boxes():
    d = json.loads(scene.dumps(gallery.get("EX-STRIP")))
    bases = {c["id"]: c["base"] for c in d["charts"]}
    assert bases["x"]["boxes"][0] == {"lo": ["-4", "-1"], "hi": ["2", "1"]}
    assert bases["y"]["boxes"][0] == {"lo": ["-2", "-1"], "hi": ["4", "1"]}
    assert bases["z"]["boxes"][0] == {"lo": ["-1"], "hi": ["1"]}


def test_json_syntax_errors_carry_line_and_column():
    with pytest.raises(ParseError) as e:
        scene.loads('{\n  "schema": 1,\n  "charts": [,]\n}')
    assert e.value.line == 3 and e.value.column > 0


def test_unknown_reference_is_located():
    d = json.loads(scene.dumps(gallery.get("EX-FIG3")))
    d["changes"][0]["to"] = "nowhere"
    text = json.dumps(d, indent=1)
    with pytest.raises(ParseError) as e:
        scene.loads(text)
    assert e.value.line == text[: text.index('"nowhere"')].count("\n") + 1


def test_wrong_schema_is_rejected():
    d = json.loads(scene.dumps(gallery.get("EX-Z2")))
    d["schema"] = 2
    with pytest.raises(ParseError):
        scene.loads(json.dumps(d))


def test_unknown_gallery_name():
    with pytest.raises(UnknownGallery):
        gallery.get("EX-NOPE")
