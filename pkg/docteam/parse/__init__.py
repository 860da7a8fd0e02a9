from .answer import extract_answer, parse_confidence, parse_ranking
from .complexity import parse_complexity
from .outcome import Confidence, ParseOutcome
from .roster import Participation, parse_participation, parse_roster, parse_structure
