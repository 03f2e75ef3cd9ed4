import base64
import io

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from inpaint_lab.service import create_app, load_bundle


def png_b64(arr: np.ndarray, mode=None) -> str:
    buf = io.BytesIO()
    Image.fromarray(arr, mode=mode).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_b64_png(b64: str) -> np.ndarray:
    with Image.open(io.BytesIO(base64.b64decode(b64))) as im:
        return np.asarray(im)


@pytest.fixture(scope="module")
def client(toy_checkpoint):
    return TestClient(create_app(load_bundle(toy_checkpoint)))


@pytest.fixture
def rgb(rng):
    return rng.integers(0, 256, (32, 32, 3)).astype(np.uint8)


class TestHealth:
    def test_reports_model_and_receptive_field(self, client):
        r = client.get("/health")
        assert r.status_code == 200
        body = r.json()
        assert body["status"] == "ok"
        assert body["levels"] == 2
        assert body["receptive_field"] >= 16
        assert body["model_id"] == "ckpt_final"


class TestInpaint:
    def test_zero_mask_returns_input_pixels(self, client, rgb):
        mask = np.zeros((32, 32), dtype=np.uint8)
        r = client.post("/inpaint", json={"image": png_b64(rgb), "mask": png_b64(mask, "L")})
        assert r.status_code == 200
        out = decode_b64_png(r.json()["image"])
        np.testing.assert_array_equal(out, rgb)

    def test_unmasked_pixels_preserved(self, client, rgb):
        mask = np.zeros((32, 32), dtype=np.uint8)
        mask[4:20, 6:22] = 255
        r = client.post("/inpaint", json={"image": png_b64(rgb), "mask": png_b64(mask, "L")})
        assert r.status_code == 200
        out = decode_b64_png(r.json()["image"])
        keep = mask < 128
        assert (out[keep] == rgb[keep]).all()

    def test_stateless_identical_responses(self, client, rgb):
        mask = np.zeros((32, 32), dtype=np.uint8)
        mask[10:18, 10:18] = 255
        payload = {"image": png_b64(rgb), "mask": png_b64(mask, "L")}
        assert client.post("/inpaint", json=payload).json() == \
               client.post("/inpaint", json=payload).json()

    def test_gray_mask_thresholded_at_128(self, client, rgb):
        mask = np.full((32, 32), 127, dtype=np.uint8)  # just below: keep everything
        r = client.post("/inpaint", json={"image": png_b64(rgb), "mask": png_b64(mask, "L")})
        np.testing.assert_array_equal(decode_b64_png(r.json()["image"]), rgb)


class TestInpaintErrors:
    def test_mismatched_mask_dims(self, client, rgb):
        mask = np.zeros((16, 16), dtype=np.uint8)
        r = client.post("/inpaint", json={"image": png_b64(rgb), "mask": png_b64(mask, "L")})
        assert r.status_code == 400
        err = r.json()["error"]
        assert err["field"] == "mask"
        assert "16x16" in err["message"] and "32x32" in err["message"]

    def test_invalid_base64(self, client):
        r = client.post("/inpaint", json={"image": "!!!", "mask": "!!!"})
        assert r.status_code == 400
        assert r.json()["error"]["field"] == "image"

    def test_not_a_png(self, client, rgb):
        bogus = base64.b64encode(b"plain text").decode("ascii")
        r = client.post("/inpaint", json={"image": bogus, "mask": png_b64(rgb[..., 0], "L")})
        assert r.status_code == 400
        assert "PNG" in r.json()["error"]["message"]

    def test_missing_field_is_400_json(self, client, rgb):
        r = client.post("/inpaint", json={"image": png_b64(rgb)})
        assert r.status_code == 400
        assert "error" in r.json()

    def test_oversize_rejected_413(self, client):
        wide = np.zeros((1, 4097, 3), dtype=np.uint8)
        mask = np.zeros((1, 4097), dtype=np.uint8)
        r = client.post("/inpaint", json={"image": png_b64(wide), "mask": png_b64(mask, "L")})
        assert r.status_code == 413

    def test_indivisible_resolution_mentions_padding(self, client, rng):
        odd = rng.integers(0, 256, (31, 31, 3)).astype(np.uint8)
        mask = np.zeros((31, 31), dtype=np.uint8)
        r = client.post("/inpaint", json={"image": png_b64(odd), "mask": png_b64(mask, "L")})
        assert r.status_code == 400
        assert "pad" in r.json()["error"]["message"]
