"""
From VOC XML to train/test manifests
====================================

Parse a couple of annotation files, flatten them into CSV rows, build a
label map and split images into train and test.
"""

from detkit.annotations import (
    LabelMap,
    SplitSpec,
    parse_voc,
    split_dataset,
    split_sizes,
    to_manifest,
    write_label_map,
    write_manifest,
)

xml = """<annotation>
  <filename>abc.jpg</filename>
  <size><width>1067</width><height>1600</height><depth>3</depth></size>
  <object>
    <name>lying</name>
    <difficult>0</difficult>
    <bndbox><xmin>1</xmin><ymin>504</ymin><xmax>989</xmax><ymax>1240</ymax></bndbox>
  </object>
</annotation>"""

ann = parse_voc(xml)
print(ann)

rows = to_manifest([ann])
print(write_manifest(rows))

print(write_label_map(LabelMap.from_names(r.class_name for r in rows)))

# splits work on image names; fractions are rounded half up
images = [f"img_{i:03d}.jpg" for i in range(258)]
spec = SplitSpec(train_fraction=0.85, eval_fraction=0.074, seed=7)
print("train/test/eval sizes:", split_sizes(len(images), spec))
split = split_dataset(images, spec)
print("first train images:", split.train[:3])
