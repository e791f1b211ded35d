import pytest

from detkit.annotations import GroundTruthObject, ImageAnnotation
from detkit.geometry import BoundingBox, ImageSize

ABC_XML = """<annotation>
  <folder>images</folder>
  <filename>abc.jpg</filename>
  <size><width>1067</width><height>1600</height><depth>3</depth></size>
  <object>
    <name>lying</name>
    <pose>Unspecified</pose>
    <truncated>0</truncated>
    <difficult>0</difficult>
    <bndbox><xmin>1</xmin><ymin>504</ymin><xmax>989</xmax><ymax>1240</ymax></bndbox>
  </object>
</annotation>
"""

XYZ_XML = """<annotation>
  <filename>xyz.jpg</filename>
  <size><width>1080</width><height>1080</height></size>
  <object>
    <name>standing</name>
    <bndbox><xmin>21</xmin><ymin>184</ymin><xmax>1062</xmax><ymax>1066</ymax></bndbox>
  </object>
</annotation>
"""

REFERENCE_CSV = (
    "file,w,h,class,x-min,y-min,x-max,y-max\n"
    "abc.jpg,1067,1600,lying,1,504,989,1240\n"
    "xyz.jpg,1080,1080,standing,21,184,1062,1066\n"
)


@pytest.fixture
def abc_annotation():
    return ImageAnnotation(
        "abc.jpg", ImageSize(1067, 1600), (GroundTruthObject("lying", BoundingBox(1, 504, 989, 1240)),)
    )


@pytest.fixture
def xyz_annotation():
    return ImageAnnotation(
        "xyz.jpg", ImageSize(1080, 1080), (GroundTruthObject("standing", BoundingBox(21, 184, 1062, 1066)),)
    )
