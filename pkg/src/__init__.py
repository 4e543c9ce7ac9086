# GraphDiffMed Desk Lab (V1)
__version__ = "1.0.0"
