from .router import build_parser
