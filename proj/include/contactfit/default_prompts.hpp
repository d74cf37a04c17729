#pragma once

// Built-in copies of prompts/two_person.txt and prompts/one_person.txt so
// gateway runs work without an explicit --prompt flag.  A test pins these
// to the shipped files byte for byte.

namespace contactfit::prompts {

inline const char* const kTwoPerson =
    "You are a helpful assistant. You follow all directions correctly and precisely.\n"
    "\n"
    "For each image, identify all pairs of body parts of Person 1 and Person 2 that are "
    "touching.\n"
    "\n"
    "Write all of these in a Markdown table where the first column is \"Person 1 Body Part\" "
    "and the second column is \"Person 2 Body Part\".\n"
    "\n"
    "You can pick which is Person 1 and which is Person 2.\n"
    "\n"
    "The list of possible body parts is: head, neck, chest, stomach, waist (back), waist "
    "(front), back, shoulder (back), shoulder (front), arm, hand, leg, foot, butt.\n"
    "\n"
    "Do not include left/right.\n"
    "\n"
    "List ALL pairs you are confident about.\n"
    "\n"
    "If you are not confident about any pairs, output an empty table.\n"
    "\n"
    "Carefully write your reasoning first, and then write the Markdown table.\n";

inline const char* const kOnePerson =
    "You are a helpful assistant. You answer all questions carefully and correctly.\n"
    "\n"
    "Identify which body parts of the yogi are touching each other in this image (if any).\n"
    "\n"
    "Write each pair in a Markdown table with two columns.\n"
    "\n"
    "Each body part MUST be from this list:\n"
    "\n"
    "head, back, shoulder, arm, hand, leg, foot, stomach, butt, ground\n"
    "\n"
    "Do not write \"left\" or \"right\".\n"
    "\n"
    "Describe and name the yoga pose, and then write the Markdown table.\n"
    "\n"
    "Note that the pose may differ from the standard version, so pay close attention.\n"
    "\n"
    "Only list a part if you're certain about it.\n";

}  // namespace contactfit::prompts
