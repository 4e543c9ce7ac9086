# EHR data module
from .graphs import (DdiGraph, CausalEffectMatrices, load_ddi_edges, load_causal_matrix,
                     write_ddi_edges, write_causal_matrix, co_support_graph)
from .records import PatientRecord, Visit, read_records, load_records, write_records
from .vocab import (Vocabularies, LabStat, EncodedVisit, EncodedPatient, build_vocabularies,
                    encode_patient, encode_visit, multi_hot)
from .split import DatasetSplit, split_patients, load_split, write_split
from .synthetic import SyntheticCorpus, PlantedStructure, generate_synthetic, write_corpus, CORPUS_FILES
from .corpus import Corpus, build_corpus, load_corpus, corpus_from_synthetic
