"""Bootstrap NER datasets for low-resource languages, train a boundary-revised
multi-task tagger, and iterate on the data through a human audit loop."""

__version__ = "0.1.0"
