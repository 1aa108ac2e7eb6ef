#!/usr/bin/env python3
"""Generate the frozen word -> stem fixture used by the stemmer tests.

The reference stemmer below is a transcription of the canonical
public-domain Porter implementation (the widely circulated index-based port
of the original ANSI C program). It is deliberately kept in that style,
separate from the package's rule-table implementation, so the two act as
independent routes to the same algorithm. Run once before the test suite;
the output is committed at tests/data/porter_fixture.txt.

Usage: python scripts/gen_porter_fixture.py [out_path]
"""

import itertools
import random
import sys
from pathlib import Path


class ReferencePorter:
    """Canonical index-based Porter stemmer (b = buffer, k = last index,
    j = stem end set by ends())."""

    def __init__(self):
        self.b = ""
        self.k = 0
        self.k0 = 0
        self.j = 0

    def cons(self, i):
        if self.b[i] in "aeiou":
            return 0
        if self.b[i] == "y":
            if i == self.k0:
                return 1
            return not self.cons(i - 1)
        return 1

    def m(self):
        n = 0
        i = self.k0
        while 1:
            if i > self.j:
                return n
            if not self.cons(i):
                break
            i += 1
        i += 1
        while 1:
            while 1:
                if i > self.j:
                    return n
                if self.cons(i):
                    break
                i += 1
            i += 1
            n += 1
            while 1:
                if i > self.j:
                    return n
                if not self.cons(i):
                    break
                i += 1
            i += 1

    def vowelinstem(self):
        for i in range(self.k0, self.j + 1):
            if not self.cons(i):
                return 1
        return 0

    def doublec(self, j):
        if j < self.k0 + 1:
            return 0
        if self.b[j] != self.b[j - 1]:
            return 0
        return self.cons(j)

    def cvc(self, i):
        if (
            i < self.k0 + 2
            or not self.cons(i)
            or self.cons(i - 1)
            or not self.cons(i - 2)
        ):
            return 0
        if self.b[i] in "wxy":
            return 0
        return 1

    def ends(self, s):
        length = len(s)
        if s[length - 1] != self.b[self.k]:
            return 0
        if length > (self.k - self.k0 + 1):
            return 0
        if self.b[self.k - length + 1 : self.k + 1] != s:
            return 0
        self.j = self.k - length
        return 1

    def setto(self, s):
        self.b = self.b[: self.j + 1] + s + self.b[self.j + len(s) + 1 :]
        self.k = self.j + len(s)

    def r(self, s):
        if self.m() > 0:
            self.setto(s)

    def step1ab(self):
        if self.b[self.k] == "s":
            if self.ends("sses"):
                self.k -= 2
            elif self.ends("ies"):
                self.setto("i")
            elif self.b[self.k - 1] != "s":
                self.k -= 1
        if self.ends("eed"):
            if self.m() > 0:
                self.k -= 1
        elif (self.ends("ed") or self.ends("ing")) and self.vowelinstem():
            self.k = self.j
            if self.ends("at"):
                self.setto("ate")
            elif self.ends("bl"):
                self.setto("ble")
            elif self.ends("iz"):
                self.setto("ize")
            elif self.doublec(self.k):
                self.k -= 1
                if self.b[self.k] in "lsz":
                    self.k += 1
            elif self.m() == 1 and self.cvc(self.k):
                self.setto("e")

    def step1c(self):
        if self.ends("y") and self.vowelinstem():
            self.b = self.b[: self.k] + "i" + self.b[self.k + 1 :]

    def step2(self):
        if self.k <= self.k0:
            return
        ch = self.b[self.k - 1]
        if ch == "a":
            if self.ends("ational"):
                self.r("ate")
            elif self.ends("tional"):
                self.r("tion")
        elif ch == "c":
            if self.ends("enci"):
                self.r("ence")
            elif self.ends("anci"):
                self.r("ance")
        elif ch == "e":
            if self.ends("izer"):
                self.r("ize")
        elif ch == "l":
            if self.ends("abli"):
                self.r("able")
            elif self.ends("alli"):
                self.r("al")
            elif self.ends("entli"):
                self.r("ent")
            elif self.ends("eli"):
                self.r("e")
            elif self.ends("ousli"):
                self.r("ous")
        elif ch == "o":
            if self.ends("ization"):
                self.r("ize")
            elif self.ends("ation"):
                self.r("ate")
            elif self.ends("ator"):
                self.r("ate")
        elif ch == "s":
            if self.ends("alism"):
                self.r("al")
            elif self.ends("iveness"):
                self.r("ive")
            elif self.ends("fulness"):
                self.r("ful")
            elif self.ends("ousness"):
                self.r("ous")
        elif ch == "t":
            if self.ends("aliti"):
                self.r("al")
            elif self.ends("iviti"):
                self.r("ive")
            elif self.ends("biliti"):
                self.r("ble")

    def step3(self):
        ch = self.b[self.k]
        if ch == "e":
            if self.ends("icate"):
                self.r("ic")
            elif self.ends("ative"):
                self.r("")
            elif self.ends("alize"):
                self.r("al")
        elif ch == "i":
            if self.ends("iciti"):
                self.r("ic")
        elif ch == "l":
            if self.ends("ical"):
                self.r("ic")
            elif self.ends("ful"):
                self.r("")
        elif ch == "s":
            if self.ends("ness"):
                self.r("")

    def step4(self):
        if self.k <= self.k0:
            return
        ch = self.b[self.k - 1]
        if ch == "a":
            if not self.ends("al"):
                return
        elif ch == "c":
            if not self.ends("ance") and not self.ends("ence"):
                return
        elif ch == "e":
            if not self.ends("er"):
                return
        elif ch == "i":
            if not self.ends("ic"):
                return
        elif ch == "l":
            if not self.ends("able") and not self.ends("ible"):
                return
        elif ch == "n":
            if (
                not self.ends("ant")
                and not self.ends("ement")
                and not self.ends("ment")
                and not self.ends("ent")
            ):
                return
        elif ch == "o":
            if not (
                self.ends("ion") and self.j >= self.k0 and self.b[self.j] in "st"
            ) and not self.ends("ou"):
                return
        elif ch == "s":
            if not self.ends("ism"):
                return
        elif ch == "t":
            if not self.ends("ate") and not self.ends("iti"):
                return
        elif ch == "u":
            if not self.ends("ous"):
                return
        elif ch == "v":
            if not self.ends("ive"):
                return
        elif ch == "z":
            if not self.ends("ize"):
                return
        else:
            return
        if self.m() > 1:
            self.k = self.j

    def step5(self):
        self.j = self.k
        if self.b[self.k] == "e":
            a = self.m()
            if a > 1 or (a == 1 and not self.cvc(self.k - 1)):
                self.k -= 1
        if self.b[self.k] == "l" and self.doublec(self.k) and self.m() > 1:
            self.k -= 1

    def stem(self, word):
        self.b = word
        self.k = len(word) - 1
        self.k0 = 0
        if self.k <= self.k0 + 1:
            return word
        self.step1ab()
        self.step1c()
        self.step2()
        self.step3()
        self.step4()
        self.step5()
        return self.b[self.k0 : self.k + 1]


BASES = """
abandon ability able abolish absorb abstract academy accent accept access
accident account accurate achieve acid acquire act action active adapt add
address adequate adjust admire admit adopt advance advantage adventure
advise affect agree agriculture air algebra align allow alternate amaze
amuse analog analyze anchor angle animal announce annoy answer anticipate
appear apple apply appreciate approach approve argue arrange arrive art
assemble assess assign assist associate assume assure atom attach attack
attend attract author automate avail average avoid awake balance band bank
bare base basic battle bear beauty believe benefit bias bind biology blame
blend block board boil bond border bore borrow bounce brand brave break
breathe bubble budget build burn bury cable calculate calm cancel capture
care caress carry cat catalog cater cause cease celebrate center certain
chain challenge chance change charge chart chase cheap check chemistry
choose circle cite civil claim classify clean clear climb close cloud
cluster coach code collapse collect color combine comfort command comment
commit common communicate compare compete compile complete compose compute
conclude condition conduct confer configure confirm conflate confuse
connect consider consist console constant construct consult consume contain
continue contract contribute control converge convert convey convince cook
cool cooperate coordinate copy correct correlate correspond corrupt count
cover crash create credit critic cross crowd cry culture cure current curve
custom cycle damage dance dare data date debate decide declare decode
decorate decrease deduce defend define deflate degrade delay delegate
delete deliver demand demonstrate deny depend deposit derive describe
design desire detect determine develop device devote dictate die differ
digest digitize dilute dimension diminish direct disable discover discuss
dismiss dispatch display dispose dispute dissolve distance distribute
disturb dive divide document dominate donate double doubt draft drain
dream drift drive drop dry duplicate dwell early earn ease echo edit
educate elaborate elect electric elevate eliminate embed emerge emit
emphasize employ enable encode encourage end endure energy enforce engage
engine enhance enjoy enlarge enrich enroll ensure enter entertain entire
equal equate equip erase erode escape establish estimate evaluate evolve
exact examine exceed excel except exchange excite exclude excuse execute
exercise exist expand expect experiment explain explode explore export
expose express extend extract face fail fall false fascinate fasten favor
feed feel fetch file fill filter final find fine finish fire firm fit fix
flash flat flex float flood flow fluctuate focus fold follow force forget
form formalize formulate fortify found fragment frame free freeze frequent
fresh fuel fulfill function fund fuse gain gather gaze generalize generate
gentle glow govern grade grant grasp great grid grind grip grow guarantee
guard guess guide handle happy hard harm harmonize hate heal hear heat help
hesitate hide high hire hold hope hop host house hover humanize hurry
identify ignore illustrate imagine imitate immerse impact imply import
impose improve include increase indicate induce infer inflate inform
inhabit inherit initiate inject injure inquire insert insist inspect
inspire install instruct insulate insure integrate intend interact
interest interfere interpret interrupt introduce invent invest investigate
invite involve isolate issue iterate join judge jump justify keep kick kill
kind knock know label labor land large last late laugh launch lead lean
learn leave lecture legal lend level liberate license lift light limit
line link list listen live load local locate lock logic long look loose
lose love lower machine magnetize mail maintain major make manage
manipulate manufacture map mark market master match mate mature maximize
mean measure mediate meet melt memorize mention merge mess migrate mind
minimize minister mix mobilize model moderate modify monitor motivate
mount move multiply name narrate navigate near neglect negotiate nest
neutralize note notice notify number nurse obey object oblige observe
obtain occupy occur offend offer open operate oppose optimize orbit order
organize orient original oscillate outline overcome overlap own pack page
paint pair panic parse part participate pass paste pause pay perceive
perfect perform permit persist persuade phase photograph pick picture
pile pilot pin place plan plant play plead please plot point polish
ponder pony populate pose position possess post postpone pour practice
praise predict prefer prepare present preserve press pretend prevent
print privilege probe proceed process produce profile program progress
project promise promote prompt prove provide publish pull pump punish
purchase pursue push qualify quantify question quote race radiate raise
randomize range rank rate rational reach react read realize reason
receive recognize recommend record recover reduce refer refine reflect
reform refresh refuse regard register regret regulate relate relax
release rely remain remark remember remind remove render renew repair
repeat replace reply report represent request require rescue research
resemble reserve reside resist resolve respect respond restore restrict
result resume retain retire retrieve return reveal reverse review revise
revive reward ride rise risk roll rotate route rub rude rule run rush
sail sample satisfy save scale scan schedule score scratch seal search
season seat secure seed seek select sell send sense separate serve set
settle shape share sharpen shift shine ship shock shop show sign signal
simplify simulate sing sink sit size sketch skip sky slide slip slow
smile smooth soften solve sort sound spare speak special specialize
specify speculate spell spend spill spin split sponsor spread spring
stabilize stack stage stand standardize start state station stay steer
stem step stick stimulate stir stop store strain stream strengthen
stress stretch strike strive structure struggle study submit subscribe
substitute succeed suffer suggest suit summarize supply support suppose
surprise surround survive suspend sustain swear sweep swim swing switch
symbolize synthesize tabulate take talk tap target taste teach tell
tend terminate test thank theorize think thrive throw tie tighten time
toe tolerate touch trace track trade train transfer transform translate
transmit transport trap travel treat tree tremble trend trim trouble
trust try tune turn twist type unify unite update upgrade urge use
utilize validate value vanish vary vibrate view visit visualize
voice vote wait wake walk wander want warm warn wash waste watch wave
wear weigh welcome widen win wind wish wonder work worry wrap write
yield zone
""".split()

SUFFIXES = [
    "", "s", "es", "ed", "ing", "ings", "er", "ers", "est", "ly", "y",
    "ies", "sses", "eed", "ation", "ations", "ational", "tional", "enci",
    "anci", "izer", "abli", "alli", "entli", "eli", "ousli", "ization",
    "ator", "alism", "iveness", "fulness", "ousness", "aliti", "iviti",
    "biliti", "icate", "ative", "alize", "iciti", "ical", "ful", "ness",
    "al", "ance", "ence", "ic", "able", "ible", "ant", "ement", "ment",
    "ent", "ion", "sion", "tion", "ou", "ism", "ate", "iti", "ous",
    "ive", "ize", "e", "l", "ll",
]

EXTRAS = """
aaron abatements abeyance accessibility accountability acknowledgements
agreed allowance analogously ambiguity apologize archaeology bagsik
bead bled bias bowdlerize cease ceiling communism conditional conflated
controll controlling cries cried crying dearly deny died dies dying eases
easily eed electriciti embodiment enormously feed fees fizzed fled flies
flying foodex gas goodness gyroscopic happily hissing homologou homologoi
hoped hopping inference ion ions irritant japan keyword keywords krapivin
matrices maximum minimum motoring mule news oaten obligated oscillator
plastered probate rational relational replacement rolled rolls sands sing
sized skies sky skies snowing spied swallowed tanned theses tied ties
transformer tree trees troubles vietnamization vileli was wilderness
""".split()


def pseudo_words(rng, count):
    onsets = ["b", "c", "d", "f", "g", "pl", "tr", "st", "sh", "qu", "spr", "k", "m"]
    nuclei = ["a", "e", "i", "o", "u", "ea", "ou", "oo", "y"]
    codas = ["t", "n", "r", "ss", "ck", "mp", "x", "w", "l", "ll", "d", "zz", ""]
    words = set()
    while len(words) < count:
        parts = []
        for _ in range(rng.randint(1, 3)):
            parts.append(rng.choice(onsets) + rng.choice(nuclei) + rng.choice(codas))
        words.add("".join(parts) + rng.choice(SUFFIXES))
    return sorted(words)


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else (
        Path(__file__).resolve().parent.parent / "tests" / "data" / "porter_fixture.txt"
    )
    rng = random.Random(180)
    words = set(EXTRAS)
    for base, suffix in itertools.product(BASES, SUFFIXES):
        words.add(base + suffix)
    words.update(pseudo_words(rng, 3000))
    words = sorted(w for w in words if w.isalpha() and w == w.lower())
    stemmer = ReferencePorter()
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        for w in words:
            fh.write(f"{w} {stemmer.stem(w)}\n")
    print(f"wrote {len(words)} pairs to {out}")


if __name__ == "__main__":
    main()
