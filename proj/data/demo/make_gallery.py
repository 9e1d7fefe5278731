"""Regenerates the demo catalogue: one small PNG and one JSON line per product."""

import json
import pathlib

from PIL import Image

COLORS = {
    "beige": (222, 204, 170),
    "black": (20, 20, 20),
    "gray": (128, 128, 128),
    "natural": (235, 225, 200),
    "red": (200, 30, 40),
    "white": (250, 250, 250),
}
MATERIALS = ["cotton", "wool"]
TYPES = ["coat", "dress", "tee"]

here = pathlib.Path(__file__).parent
lines = []
for color, rgb in COLORS.items():
    for m, material in enumerate(MATERIALS):
        for t, kind in enumerate(TYPES):
            item_id = f"{color}-{material}-{kind}"
            img = Image.new("RGB", (16, 16), rgb)
            for x in range(16):
                img.putpixel((x, m * 8 + t), (m * 90, t * 60, 255 - t * 60))
            path = here / "images" / f"{item_id}.png"
            img.save(path, format="PNG", optimize=False)
            lines.append(
                {
                    "id": item_id,
                    "description": f"{color} {material} {kind}",
                    "image_path": f"images/{item_id}.png",
                    "attributes": [color, material, kind],
                }
            )
(here / "gallery.jsonl").write_text("".join(json.dumps(l) + "\n" for l in lines))
